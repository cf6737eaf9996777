// Pure HTML renderers, one per view. Each takes the latest snapshot and
// returns a string; main.ts owns the DOM and event wiring. Numbers are
// printed exactly as the snapshot carries them (no client-side rounding
// beyond display formatting that keeps the raw value in a title attribute).

import type { Publication, RankedIdea, Snapshot } from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function score(value: number | null): string {
  if (value === null) return '–';
  return `<span class="num" title="${value}">${value.toFixed(3)}</span>`;
}

export function renderSetup(): string {
  return `
<section class="panel" id="setup">
  <h2>Start a session</h2>
  <label>ORCID <input id="orcid" placeholder="0000-0002-1825-0097" /></label>
  <label>Research question <input id="query" placeholder="How can we improve ...?" /></label>
  <label>API token (optional) <input id="token" type="password" /></label>
  <button id="create">Retrieve context</button>
</section>`;
}

function publicationRow(pub: Publication, selected: boolean): string {
  return `
  <li>
    <label>
      <input type="checkbox" class="pub" data-id="${escapeHtml(pub.id)}" ${selected ? 'checked' : ''} />
      ${escapeHtml(pub.title)} <small>${escapeHtml(pub.source)}</small>
    </label>
  </li>`;
}

export function renderPublicationPicker(snapshot: Snapshot): string {
  const selected = new Set(snapshot.selected_publication_ids);
  const author = snapshot.author_publications.map((p) => publicationRow(p, selected.has(p.id))).join('');
  const related = snapshot.related_publications.map((p) => publicationRow(p, selected.has(p.id))).join('');
  return `
<section class="panel" id="picker">
  <h2>Publications</h2>
  <div class="tabs">
    <div class="tab">
      <h3>Yours (${snapshot.author_publications.length})</h3>
      <ul>${author}</ul>
    </div>
    <div class="tab">
      <h3>Related (${snapshot.related_publications.length})</h3>
      <ul>${related}</ul>
    </div>
  </div>
  <button id="apply-selection">Use selected publications</button>
  <button id="run-facets">Extract facets</button>
  <button id="run-gap">Identify gap</button>
</section>`;
}

function ideaCard(idea: RankedIdea): string {
  const badge = idea.is_aha ? '<span class="badge aha">Aha</span>' : '';
  const rubric = idea.rubric
    ? `<div class="rubric">
        novelty ${score(idea.rubric.novelty)} ·
        excitement ${score(idea.rubric.excitement)} ·
        feasibility ${score(idea.rubric.feasibility)} ·
        effectiveness ${score(idea.rubric.effectiveness)} ·
        overall ${score(idea.rubric.overall)}
      </div>`
    : '';
  const surprise = idea.surprise_skipped
    ? `<span class="muted" title="${escapeHtml(idea.surprise_skipped)}">surprise unavailable</span>`
    : `surprise ${score(idea.surprise)}`;
  return `
  <article class="card ${idea.is_aha ? 'aha' : ''}" data-id="${idea.id}">
    ${badge}<span class="prov">${idea.provenance}</span>
    <h4>#${idea.id} ${escapeHtml(idea.title)}</h4>
    <p>${escapeHtml(idea.description)}</p>
    <div class="scores">novelty ${score(idea.novelty)} · ${surprise} · iteration ${idea.iteration}</div>
    ${rubric}
  </article>`;
}

export function renderIdeaBoard(snapshot: Snapshot): string {
  const cards = snapshot.ranked_ideas.map(ideaCard).join('');
  const t = snapshot.thresholds;
  return `
<section class="panel" id="board">
  <h2>Idea board <small>${snapshot.status}</small></h2>
  <div class="thresholds">
    <label>novelty threshold θn
      <input id="theta-n" type="range" min="0" max="2" step="0.05" value="${t.theta_n}" />
      <span id="theta-n-value">${t.theta_n}</span>
    </label>
    <label>surprise threshold θs
      <input id="theta-s" type="range" min="0" max="10" step="0.1" value="${t.theta_s}" />
      <span id="theta-s-value">${t.theta_s}</span>
    </label>
    <button id="apply-thresholds">Apply thresholds</button>
    <span id="threshold-error" class="error"></span>
  </div>
  <button id="run-iteration">Generate ideas</button>
  <button id="run-rank">Rank ideas</button>
  <div class="cards">${cards || '<p class="muted">No ideas yet.</p>'}</div>
  <div class="feedback">
    <textarea id="feedback-text" placeholder="Researcher focus points, e.g. incorporate GRPO"></textarea>
    <button id="send-feedback" disabled>Send feedback &amp; iterate</button>
    <span id="feedback-pending" class="muted"></span>
  </div>
</section>`;
}

export function renderTimeline(snapshot: Snapshot): string {
  const reports = snapshot.iteration_reports
    .map(
      (r) =>
        `<li>iteration ${r.iteration}: ${r.generated} generated, ${r.aha_flagged} Aha, ${r.deep_dives} deep dives</li>`,
    )
    .join('');
  const feedback = snapshot.feedback_log.map((f) => `<li>feedback: ${escapeHtml(f)}</li>`).join('');
  const warnings = snapshot.warnings.map((w) => `<li class="warn">${escapeHtml(w)}</li>`).join('');
  return `
<section class="panel" id="timeline">
  <h2>Timeline</h2>
  <ul>${reports}${feedback}${warnings}</ul>
  <p class="muted">gap: ${escapeHtml(snapshot.gap || '(not identified yet)')}</p>
</section>`;
}

export function renderRankedList(snapshot: Snapshot): string {
  const ranked = snapshot.ranked_ideas.filter((idea) => idea.rubric !== null);
  if (!ranked.length) return '';
  const rows = ranked
    .map(
      (idea, position) => `
    <li>
      <strong>${position + 1}.</strong> #${idea.id} ${escapeHtml(idea.title)}
      <span class="num" title="${idea.rubric!.overall}">overall ${idea.rubric!.overall.toFixed(2)}</span>
      <button class="accept" data-id="${idea.id}" ${snapshot.accepted_candidate_id !== null ? 'disabled' : ''}>
        Accept
      </button>
    </li>`,
    )
    .join('');
  const accepted =
    snapshot.accepted_candidate_id !== null
      ? `<p class="accepted">Accepted idea #${snapshot.accepted_candidate_id}</p>`
      : '';
  return `
<section class="panel" id="ranked">
  <h2>Final ranking</h2>
  <ol>${rows}</ol>
  ${accepted}
</section>`;
}

export function renderErrorBanner(code: string, message: string): string {
  if (code === 'NOT_FOUND') {
    return `<section class="panel error-screen"><h2>Session not found</h2><p>${escapeHtml(message)}</p></section>`;
  }
  return `<div class="banner error">${escapeHtml(code)}: ${escapeHtml(message)}</div>`;
}

export function renderSession(snapshot: Snapshot): string {
  return [
    renderPublicationPicker(snapshot),
    renderIdeaBoard(snapshot),
    renderTimeline(snapshot),
    renderRankedList(snapshot),
  ].join('\n');
}
