"""Context-aware scientific ideation pipeline.

Retrieves a researcher's publication context, extracts facets, identifies a
research gap, generates and scores candidate ideas (novelty via embedding
cosine distance, surprise via token log-likelihood), flags and deep-dives
Aha moments, ranks the results with a judge rubric, and supports iterative
human-in-the-loop refinement through a journaled session service and CLI.
"""

__version__ = "0.1.0"
