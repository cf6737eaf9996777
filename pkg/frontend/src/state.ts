// Client-side session state: the latest server snapshot plus the
// pending-action guard. All derived values below read the snapshot only;
// the console never computes novelty, surprise, or overall locally.

import type { RankedIdea, Snapshot } from './types.js';

export const POLL_INTERVAL_MS = 1500;

export const THETA_N_RANGE: readonly [number, number] = [0, 2];
// UI slider range for the surprise threshold; the server accepts any value >= 0.
export const THETA_S_RANGE: readonly [number, number] = [0, 10];

export interface SessionView {
  snapshot: Snapshot | null;
  pollingInterval: number;
  pendingAction: boolean;
  error: string | null;
}

export function initialView(): SessionView {
  return { snapshot: null, pollingInterval: POLL_INTERVAL_MS, pendingAction: false, error: null };
}

export class ConsoleStore {
  view: SessionView = initialView();
  private queuedFeedback: string[] = [];

  applySnapshot(snapshot: Snapshot): void {
    this.view = { ...this.view, snapshot, error: null };
  }

  setError(message: string): void {
    this.view = { ...this.view, error: message };
  }

  /** Single in-flight mutation, consistent with the server's single-writer
   *  lock. Returns false when a mutation is already running. */
  beginAction(): boolean {
    if (this.view.pendingAction) return false;
    this.view = { ...this.view, pendingAction: true };
    return true;
  }

  endAction(): void {
    this.view = { ...this.view, pendingAction: false };
  }

  /** Feedback typed while a stage runs is queued and submitted afterwards. */
  queueFeedback(text: string): void {
    this.queuedFeedback.push(text);
  }

  drainFeedback(): string[] {
    const drained = this.queuedFeedback;
    this.queuedFeedback = [];
    return drained;
  }

  get pendingFeedback(): readonly string[] {
    return this.queuedFeedback;
  }

  /** Keep polling while the server reports a running stage. */
  shouldPoll(): boolean {
    const snapshot = this.view.snapshot;
    return !!snapshot && snapshot.pending_action !== null;
  }
}

export function validThetaN(value: number): boolean {
  return Number.isFinite(value) && value >= THETA_N_RANGE[0] && value <= THETA_N_RANGE[1];
}

export function validThetaS(value: number): boolean {
  return Number.isFinite(value) && value >= THETA_S_RANGE[0] && value <= THETA_S_RANGE[1];
}

export function canSubmitFeedback(text: string): boolean {
  return text.trim().length > 0;
}

/** Aha badges come from the server's flags, nothing else. */
export function ahaIdeas(snapshot: Snapshot): RankedIdea[] {
  return snapshot.ranked_ideas.filter((idea) => idea.is_aha);
}

/** Cards in server order: ranked by overall when rubrics exist. */
export function orderedIdeas(snapshot: Snapshot): RankedIdea[] {
  return snapshot.ranked_ideas;
}

/** Every numeric value shown on an idea card, for render-audit checks. */
export function ideaCardNumbers(idea: RankedIdea): number[] {
  const numbers: number[] = [idea.id, idea.iteration];
  if (idea.novelty !== null) numbers.push(idea.novelty);
  if (idea.surprise !== null) numbers.push(idea.surprise);
  if (idea.rubric) {
    numbers.push(
      idea.rubric.novelty,
      idea.rubric.excitement,
      idea.rubric.feasibility,
      idea.rubric.effectiveness,
      idea.rubric.overall,
    );
  }
  return numbers;
}
