/**
 * HTML fragments for the queue view. Pure string builders, so rendered
 * output is testable without a browser; app.ts owns all DOM wiring.
 */

import type { Progress, QueueItem } from "./api.js";
import type { ComponentGroup } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Counters straight from /api/progress; nothing is recomputed client-side. */
export function renderProgress(progress: Progress | null): string {
  if (progress === null) return `<span class="muted">loading...</span>`;
  return (
    `<span class="counter">pending <strong>${progress.pending}</strong></span>` +
    `<span class="counter">decided <strong>${progress.decided}</strong></span>` +
    `<span class="counter">retained if exported <strong>${progress.retained_if_exported}</strong></span>`
  );
}

export function renderVerdictBadges(latest: Record<string, string>): string {
  const reviewers = Object.keys(latest).sort();
  if (reviewers.length === 0) {
    return `<span class="badge badge-pending">pending</span>`;
  }
  return reviewers
    .map(
      (reviewer) =>
        `<span class="badge badge-${escapeHtml(latest[reviewer])}">` +
        `${escapeHtml(reviewer)}: ${escapeHtml(latest[reviewer])}</span>`,
    )
    .join(" ");
}

function renderCodes(item: QueueItem): string {
  return item.codes
    .map(
      (c) =>
        `<li><code>${escapeHtml(c.code)}</code> ${escapeHtml(c.description)} ` +
        `<span class="muted">(${c.patient_count} patient${c.patient_count === 1 ? "" : "s"})</span></li>`,
    )
    .join("");
}

export function renderRow(item: QueueItem, selected: boolean): string {
  const termId = escapeHtml(item.term_id);
  return (
    `<article class="term${selected ? " selected" : ""}" data-term-id="${termId}">` +
    `<div class="term-head">` +
    `<span class="phrase">${escapeHtml(item.phrase)}</span>` +
    `<span class="muted">${escapeHtml(item.component)} / ${escapeHtml(item.provenance)}</span>` +
    `<span class="verdicts">${renderVerdictBadges(item.latest)}</span>` +
    `<span class="term-actions">` +
    `<button data-action="approve" data-term-id="${termId}">approve</button>` +
    `<button data-action="reject" data-term-id="${termId}">reject</button>` +
    `</span>` +
    `</div>` +
    `<ul class="codes">${renderCodes(item)}</ul>` +
    `</article>`
  );
}

export function renderQueue(groups: ComponentGroup[], selectedTermId: string | null): string {
  if (groups.length === 0) {
    return `<p class="empty">no pending terms</p>`;
  }
  return groups
    .map(
      (group) =>
        `<section class="component-group">` +
        `<h2>${escapeHtml(group.component)} <span class="muted">${group.items.length}</span></h2>` +
        group.items.map((item) => renderRow(item, item.term_id === selectedTermId)).join("") +
        `</section>`,
    )
    .join("");
}
