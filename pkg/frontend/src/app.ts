/**
 * Browser entry point: fetch and render the queue, run the keyboard review
 * loop, poll progress, and hand decisions to the server. State transitions
 * live in state.ts and markup in render.ts; this file only wires the DOM.
 */

import { ReviewApi, type Verdict } from "./api.js";
import { componentsOf, ReviewSession, submitVerdict } from "./state.js";
import { escapeHtml, renderProgress, renderQueue } from "./render.js";

const PROGRESS_POLL_MS = 2000;
const QUEUE_REFRESH_TICKS = 3; // re-pull the queue every third progress poll

function must<T extends HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (!element) throw new Error(`missing element #${id}`);
  return element as T;
}

const reviewerInput = must<HTMLInputElement>("reviewer");
const componentSelect = must<HTMLSelectElement>("component-filter");
const pendingOnlyBox = must<HTMLInputElement>("pending-only");
const ruleSelect = must<HTMLSelectElement>("rule");
const progressSpan = must<HTMLElement>("progress");
const exportLink = must<HTMLAnchorElement>("export");
const errorBar = must<HTMLElement>("error");
const queueMain = must<HTMLElement>("queue");

const api = new ReviewApi();
const session = new ReviewSession(sessionStorage.getItem("reviewer_id") ?? "");
let selectedTermId: string | null = null;
let lastFailed: { termId: string; verdict: Verdict } | null = null;
let lastQueueJson = "";
let pollTick = 0;

function setError(message: string | null): void {
  if (message === null) {
    lastFailed = null;
    errorBar.classList.add("hidden");
    errorBar.innerHTML = "";
    return;
  }
  const retry = lastFailed ? ` <button id="retry">retry</button>` : "";
  errorBar.innerHTML = `${escapeHtml(message)}${retry}`;
  errorBar.classList.remove("hidden");
  const retryButton = document.getElementById("retry");
  if (retryButton && lastFailed) {
    const failed = lastFailed;
    retryButton.addEventListener("click", () => {
      setError(null);
      void decide(failed.termId, failed.verdict);
    });
  }
}

function describeError(exc: unknown): string {
  return exc instanceof Error ? exc.message : String(exc);
}

function renderHeader(): void {
  progressSpan.innerHTML = renderProgress(session.progress);
  const retained = session.progress?.retained_if_exported;
  exportLink.href = api.exportUrl(ruleSelect.value);
  exportLink.textContent = retained === undefined ? "export" : `export (${retained} retained)`;
}

function renderComponentOptions(): void {
  const current = componentSelect.value;
  const options = ['<option value="">all components</option>'];
  for (const component of componentsOf(session.items)) {
    options.push(`<option value="${escapeHtml(component)}">${escapeHtml(component)}</option>`);
  }
  componentSelect.innerHTML = options.join("");
  componentSelect.value = current;
  if (componentSelect.value !== current) componentSelect.value = "";
}

function renderQueueView(): void {
  const visible = session.visible();
  if (selectedTermId === null || !visible.some((i) => i.term_id === selectedTermId)) {
    selectedTermId = visible.length > 0 ? visible[0].term_id : null;
  }
  queueMain.innerHTML = renderQueue(session.visibleGroups(), selectedTermId);
  const selected = queueMain.querySelector(".term.selected");
  selected?.scrollIntoView({ block: "nearest" });
}

function moveSelection(delta: number): void {
  const visible = session.visible();
  if (visible.length === 0) return;
  const index = visible.findIndex((i) => i.term_id === selectedTermId);
  const next = index < 0 ? 0 : Math.min(visible.length - 1, Math.max(0, index + delta));
  selectedTermId = visible[next].term_id;
  renderQueueView();
}

async function refreshProgress(): Promise<void> {
  try {
    session.progress = await api.progress(ruleSelect.value);
    renderHeader();
  } catch (exc) {
    setError(describeError(exc));
  }
}

async function refreshQueue(): Promise<void> {
  try {
    const items = await api.queue();
    const serialized = JSON.stringify(items);
    if (serialized === lastQueueJson) return; // other reviewers idle, skip the repaint
    lastQueueJson = serialized;
    session.loadQueue(items);
    renderComponentOptions();
    renderQueueView();
  } catch (exc) {
    setError(describeError(exc));
  }
}

async function decide(termId: string, verdict: Verdict): Promise<void> {
  // the optimistic update inside submitVerdict is synchronous, so the row
  // can repaint before the POST settles
  const pending = submitVerdict(session, api, termId, verdict);
  moveSelection(1);
  renderQueueView();
  const outcome = await pending;
  if (outcome.ok) {
    setError(null);
    lastQueueJson = JSON.stringify(session.items);
    await refreshProgress();
  } else {
    lastFailed = { termId, verdict };
    setError(outcome.error ?? "decision failed");
  }
  renderQueueView();
}

function decideSelected(verdict: Verdict): void {
  if (selectedTermId !== null) void decide(selectedTermId, verdict);
}

function onKeyDown(event: KeyboardEvent): void {
  const target = event.target;
  if (
    target instanceof HTMLElement &&
    ["INPUT", "SELECT", "TEXTAREA"].includes(target.tagName)
  ) {
    return;
  }
  switch (event.key) {
    case "j":
    case "ArrowDown":
      moveSelection(1);
      break;
    case "k":
    case "ArrowUp":
      moveSelection(-1);
      break;
    case "a":
      decideSelected("approve");
      break;
    case "r":
      decideSelected("reject");
      break;
    case "s":
      moveSelection(1); // skip: leave the term undecided
      break;
    default:
      return;
  }
  event.preventDefault();
}

function bind(): void {
  reviewerInput.value = session.reviewerId;
  reviewerInput.addEventListener("change", () => {
    session.reviewerId = reviewerInput.value.trim();
    sessionStorage.setItem("reviewer_id", session.reviewerId);
  });
  componentSelect.addEventListener("change", () => {
    session.filters.component = componentSelect.value || null;
    renderQueueView();
  });
  pendingOnlyBox.addEventListener("change", () => {
    session.filters.pendingOnly = pendingOnlyBox.checked;
    renderQueueView();
  });
  ruleSelect.addEventListener("change", () => {
    renderHeader();
    void refreshProgress();
  });
  queueMain.addEventListener("click", (event) => {
    const target = event.target;
    if (!(target instanceof HTMLElement)) return;
    const actionEl = target.closest<HTMLElement>("[data-action]");
    if (actionEl?.dataset.termId) {
      void decide(actionEl.dataset.termId, actionEl.dataset.action as Verdict);
      return;
    }
    const row = target.closest<HTMLElement>("[data-term-id]");
    if (row?.dataset.termId) {
      selectedTermId = row.dataset.termId;
      renderQueueView();
    }
  });
  document.addEventListener("keydown", onKeyDown);
  window.setInterval(() => {
    pollTick += 1;
    void refreshProgress();
    if (pollTick % QUEUE_REFRESH_TICKS === 0) void refreshQueue();
  }, PROGRESS_POLL_MS);
}

bind();
void refreshQueue();
void refreshProgress();
