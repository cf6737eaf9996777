// Mirrors of the session service snapshot JSON. The console never invents
// fields: everything rendered comes straight from these shapes.

export interface Profile {
  name: string;
  orcid: string;
  query: string;
  keyphrases: string[];
}

export interface Publication {
  id: string;
  title: string;
  full_text: string;
  source: string;
  origin: 'AUTHOR' | 'RELATED';
}

export interface Rubric {
  novelty: number;
  excitement: number;
  feasibility: number;
  effectiveness: number;
  overall: number;
  corrected: boolean;
}

export interface RankedIdea {
  id: number;
  title: string;
  description: string;
  iteration: number;
  provenance: 'GENERATED' | 'DEEP_DIVE' | 'FEEDBACK_REVISED';
  parent_id: number | null;
  novelty: number | null;
  surprise: number | null;
  is_aha: boolean;
  embedding_strategy: string;
  surprise_skipped: string | null;
  rubric: Rubric | null;
}

export interface Thresholds {
  theta_n: number;
  theta_s: number;
}

export interface IterationReport {
  iteration: number;
  generated: number;
  aha_flagged: number;
  deep_dives: number;
}

export interface Snapshot {
  id: string;
  profile: Profile;
  author_publications: Publication[];
  related_publications: Publication[];
  selected_publication_ids: string[];
  facets: unknown[];
  gap: string;
  thresholds: Thresholds;
  feedback_log: string[];
  iteration: number;
  status: string;
  accepted_candidate_id: number | null;
  warnings: string[];
  iteration_reports: IterationReport[];
  pending_action: string | null;
  ranked_ideas: RankedIdea[];
}

export interface ApiErrorBody {
  error: { code: string; message: string; details: Record<string, unknown> };
}

export type AdvanceAction =
  | 'SELECT'
  | 'SET_THRESHOLDS'
  | 'RUN_FACETS'
  | 'RUN_GAP'
  | 'RUN_ITERATION'
  | 'RUN_RANK'
  | 'ACCEPT'
  | 'CLOSE';
