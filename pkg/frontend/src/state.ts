/**
 * View state for the review queue: grouping, filters, and optimistic
 * verdict bookkeeping with rollback. No DOM access, so every transition
 * is unit-testable in plain node.
 */

import type { Progress, QueueItem, ReviewApi, Verdict } from "./api.js";

export interface Filters {
  component: string | null;
  pendingOnly: boolean;
}

export interface ComponentGroup {
  component: string;
  items: QueueItem[];
}

/** A term stays pending until some reviewer has a standing verdict on it. */
export function isPending(item: QueueItem): boolean {
  return Object.keys(item.latest).length === 0;
}

export function applyFilters(items: QueueItem[], filters: Filters): QueueItem[] {
  return items.filter((item) => {
    if (filters.component !== null && item.component !== filters.component) return false;
    if (filters.pendingOnly && !isPending(item)) return false;
    return true;
  });
}

/** Distinct components in queue order, for the filter dropdown. */
export function componentsOf(items: QueueItem[]): string[] {
  const seen: string[] = [];
  for (const item of items) {
    if (!seen.includes(item.component)) seen.push(item.component);
  }
  return seen;
}

// first-seen order; the server already sorts by component, then phrase
export function groupByComponent(items: QueueItem[]): ComponentGroup[] {
  const groups: ComponentGroup[] = [];
  const byComponent = new Map<string, ComponentGroup>();
  for (const item of items) {
    let group = byComponent.get(item.component);
    if (!group) {
      group = { component: item.component, items: [] };
      byComponent.set(item.component, group);
      groups.push(group);
    }
    group.items.push(item);
  }
  return groups;
}

/** What rollback() needs to undo one optimistic verdict. */
export interface VerdictSnapshot {
  termId: string;
  item: QueueItem;
}

export class ReviewSession {
  reviewerId: string;
  items: QueueItem[] = [];
  filters: Filters = { component: null, pendingOnly: false };
  progress: Progress | null = null;

  constructor(reviewerId: string) {
    this.reviewerId = reviewerId;
  }

  loadQueue(items: QueueItem[]): void {
    this.items = items;
  }

  item(termId: string): QueueItem | undefined {
    return this.items.find((i) => i.term_id === termId);
  }

  visible(): QueueItem[] {
    return applyFilters(this.items, this.filters);
  }

  visibleGroups(): ComponentGroup[] {
    return groupByComponent(this.visible());
  }

  /**
   * Apply a verdict locally before the POST round-trips. The queued item
   * is replaced by a copy, never mutated, so the returned snapshot still
   * holds the untouched original for rollback.
   */
  beginVerdict(termId: string, verdict: Verdict): VerdictSnapshot {
    const index = this.items.findIndex((i) => i.term_id === termId);
    if (index < 0) throw new Error(`not in queue: ${termId}`);
    const before = this.items[index];
    this.items[index] = {
      ...before,
      latest: { ...before.latest, [this.reviewerId]: verdict },
    };
    return { termId, item: before };
  }

  /** Replace the optimistic row with the server's authoritative copy. */
  commit(term: QueueItem): void {
    this.replace(term.term_id, term);
  }

  rollback(snapshot: VerdictSnapshot): void {
    this.replace(snapshot.termId, snapshot.item);
  }

  private replace(termId: string, item: QueueItem): void {
    const index = this.items.findIndex((i) => i.term_id === termId);
    if (index >= 0) this.items[index] = item;
  }
}

export interface VerdictOutcome {
  ok: boolean;
  error?: string;
}

/**
 * Optimistically apply a verdict, POST it, and reconcile. On success the
 * server's copy of the term replaces the row; on failure the snapshot is
 * restored and the error is returned for display, never swallowed.
 *
 * The optimistic update happens synchronously before the first await, so
 * callers can re-render immediately and await the outcome after.
 */
export async function submitVerdict(
  session: ReviewSession,
  api: ReviewApi,
  termId: string,
  verdict: Verdict,
): Promise<VerdictOutcome> {
  if (!session.reviewerId.trim()) {
    return { ok: false, error: "set a reviewer id before deciding" };
  }
  const snapshot = session.beginVerdict(termId, verdict);
  try {
    const term = await api.submitDecision(termId, session.reviewerId, verdict);
    session.commit(term);
    return { ok: true };
  } catch (exc) {
    session.rollback(snapshot);
    return { ok: false, error: exc instanceof Error ? exc.message : String(exc) };
  }
}
