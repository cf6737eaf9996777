import { describe, expect, it } from 'vitest';

import {
  ConsoleStore,
  POLL_INTERVAL_MS,
  ahaIdeas,
  canSubmitFeedback,
  ideaCardNumbers,
  validThetaN,
  validThetaS,
} from '../src/state.js';
import type { RankedIdea, Snapshot } from '../src/types.js';

function idea(overrides: Partial<RankedIdea> = {}): RankedIdea {
  return {
    id: 0,
    title: 'T',
    description: 'D',
    iteration: 1,
    provenance: 'GENERATED',
    parent_id: null,
    novelty: 0.8,
    surprise: 3.5,
    is_aha: false,
    embedding_strategy: 'TOKEN_LEVEL',
    surprise_skipped: null,
    rubric: null,
    ...overrides,
  };
}

function snapshot(overrides: Partial<Snapshot> = {}): Snapshot {
  return {
    id: 's1',
    profile: { name: 'P', orcid: '0000-0002-1825-0097', query: 'q', keyphrases: [] },
    author_publications: [],
    related_publications: [],
    selected_publication_ids: [],
    facets: [],
    gap: '',
    thresholds: { theta_n: 0.7, theta_s: 2.0 },
    feedback_log: [],
    iteration: 0,
    status: 'RETRIEVED',
    accepted_candidate_id: null,
    warnings: [],
    iteration_reports: [],
    pending_action: null,
    ranked_ideas: [],
    ...overrides,
  };
}

describe('ConsoleStore', () => {
  it('allows a single mutating request in flight', () => {
    const store = new ConsoleStore();
    expect(store.beginAction()).toBe(true);
    expect(store.beginAction()).toBe(false);
    store.endAction();
    expect(store.beginAction()).toBe(true);
  });

  it('queues feedback while an action runs and drains afterwards', () => {
    const store = new ConsoleStore();
    store.beginAction();
    store.queueFeedback('focus on X');
    expect(store.pendingFeedback).toEqual(['focus on X']);
    expect(store.drainFeedback()).toEqual(['focus on X']);
    expect(store.pendingFeedback).toEqual([]);
  });

  it('polls at 1.5s while the server reports a running stage', () => {
    const store = new ConsoleStore();
    expect(POLL_INTERVAL_MS).toBe(1500);
    store.applySnapshot(snapshot({ pending_action: 'RUN_ITERATION' }));
    expect(store.shouldPoll()).toBe(true);
    store.applySnapshot(snapshot({ pending_action: null }));
    expect(store.shouldPoll()).toBe(false);
  });
});

describe('threshold validation', () => {
  it('accepts the documented slider ranges', () => {
    expect(validThetaN(0.7)).toBe(true);
    expect(validThetaN(2.0)).toBe(true);
    expect(validThetaS(2.0)).toBe(true);
    expect(validThetaS(10)).toBe(true);
  });

  it('blocks out-of-range values client-side', () => {
    expect(validThetaN(-0.1)).toBe(false);
    expect(validThetaN(2.1)).toBe(false);
    expect(validThetaS(-1)).toBe(false);
    expect(validThetaS(10.5)).toBe(false);
  });
});

describe('feedback gating', () => {
  it('disables submission for blank text', () => {
    expect(canSubmitFeedback('')).toBe(false);
    expect(canSubmitFeedback('   ')).toBe(false);
    expect(canSubmitFeedback('incorporate GRPO')).toBe(true);
  });
});

describe('server-derived views', () => {
  it('badges mirror the server flags exactly', () => {
    const snap = snapshot({
      ranked_ideas: [idea({ id: 0, is_aha: false }), idea({ id: 1, is_aha: true })],
    });
    expect(ahaIdeas(snap).map((i) => i.id)).toEqual([1]);
  });

  it('card numbers come only from snapshot fields', () => {
    const withRubric = idea({
      id: 4,
      iteration: 2,
      novelty: 0.82,
      surprise: 1.5,
      rubric: { novelty: 9, excitement: 9, feasibility: 6, effectiveness: 8, overall: 8.0, corrected: false },
    });
    expect(ideaCardNumbers(withRubric)).toEqual([4, 2, 0.82, 1.5, 9, 9, 6, 8, 8.0]);
    const unscored = idea({ novelty: null, surprise: null });
    expect(ideaCardNumbers(unscored)).toEqual([0, 1]);
  });
});
