// DOM rendering for the console. Every function takes its container, so
// nothing here touches a global document; main.ts owns the page and the
// tests hand these functions a synthetic one.

import type { RunSummary, TicketView } from './api.js';
import type { TranscriptRow, TicketInfo, RunStatus } from './model.js';
import { draftProblems, type DraftContext, type ResolutionDraft, type ResolutionKind, RESOLUTION_KINDS, splitIdList } from './drafts.js';

export function esc(text: unknown): string {
  return String(text)
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/* ── Connection banner ── */

export function renderBanner(el: HTMLElement, lost: boolean, onRetry: () => void): void {
  if (!lost) {
    el.innerHTML = '';
    el.classList.remove('visible');
    return;
  }
  el.classList.add('visible');
  el.innerHTML = `
    <span>connection lost, the view below may be stale</span>
    <button class="retry">retry</button>
  `;
  el.querySelector<HTMLButtonElement>('.retry')!.addEventListener('click', onRetry);
}

/* ── Inbox ── */

export interface InboxItem {
  ticket: TicketView;
  run: RunSummary;
  excerpt: string[];
}

function ticketNumber(ticketId: string): number {
  const n = Number(ticketId.replace(/^T/, ''));
  return Number.isFinite(n) ? n : 0;
}

/** Oldest escalation first: by run, then by ticket number within the run. */
export function sortInbox(items: InboxItem[]): InboxItem[] {
  return [...items].sort((a, b) => {
    if (a.run.run_id !== b.run.run_id) return a.run.run_id < b.run.run_id ? -1 : 1;
    return ticketNumber(a.ticket.ticket_id) - ticketNumber(b.ticket.ticket_id);
  });
}

export function renderInbox(el: HTMLElement, items: InboxItem[]): void {
  if (items.length === 0) {
    el.innerHTML = `<div class="empty-state">No open escalations. Blocked runs will appear here.</div>`;
    return;
  }
  el.innerHTML = sortInbox(items)
    .map(
      (item) => `
    <a class="inbox-card" href="#/runs/${esc(item.run.run_id)}" data-ticket="${esc(item.ticket.ticket_id)}" data-run="${esc(item.run.run_id)}">
      <div class="card-head">
        <span class="ticket-id">${esc(item.ticket.ticket_id)}</span>
        <span class="badge trigger">${esc(item.ticket.trigger)}</span>
        <span class="run-ref">${esc(item.run.run_id)} · ${esc(item.run.design_id)}</span>
      </div>
      <div class="card-summary">${esc(item.ticket.summary)}</div>
      <div class="card-meta">phase ${esc(item.run.phase ?? '?')} · ${esc(item.run.events)} events</div>
      ${item.excerpt.length ? `<div class="card-excerpt">${item.excerpt.map((l) => `<div>${esc(l)}</div>`).join('')}</div>` : ''}
    </a>`,
    )
    .join('');
}

/* ── Run header: status and phase badges, coverage gauge ── */

export function renderRunHeader(
  el: HTMLElement,
  info: {
    runId: string;
    designId: string;
    status: RunStatus | string;
    phase: string | null;
    blockingTicket: string | null;
  },
): void {
  const ticketLink = info.blockingTicket
    ? `<a class="ticket-link" href="#ticket-${esc(info.blockingTicket)}">${esc(info.blockingTicket)}</a>`
    : '';
  el.innerHTML = `
    <h2>${esc(info.runId)} <span class="design-ref">${esc(info.designId)}</span></h2>
    <div class="badges">
      <span class="badge status status-${esc(info.status)}">${esc(info.status)}</span>
      ${info.phase ? `<span class="badge phase">${esc(info.phase)}</span>` : ''}
      ${ticketLink}
    </div>
  `;
}

export function renderGauge(el: HTMLElement, pct: number | null, targetPct: number | null): void {
  if (pct === null) {
    el.innerHTML = `<div class="gauge" data-pct=""><span class="gauge-label">coverage: no data yet</span></div>`;
    return;
  }
  const shown = Math.round(pct * 100) / 100;
  const width = Math.max(0, Math.min(100, pct));
  const met = targetPct !== null && pct >= targetPct;
  el.innerHTML = `
    <div class="gauge ${met ? 'met' : ''}" data-pct="${shown}">
      <div class="gauge-track">
        <div class="gauge-fill" style="width: ${width}%"></div>
        ${targetPct !== null ? `<div class="gauge-target" style="left: ${Math.min(100, targetPct)}%"></div>` : ''}
      </div>
      <span class="gauge-label">coverage ${shown}%${targetPct !== null ? ` / target ${targetPct}%` : ''}</span>
    </div>
  `;
}

/* ── Transcript ── */

export function renderTranscript(
  el: HTMLElement,
  rows: TranscriptRow[],
  streamEnded: boolean,
): void {
  const body = rows
    .map(
      (row) => `
    <div class="row gran-${esc(row.granularity)}" data-seq="${row.seq}">
      <span class="seq">${row.seq}</span>
      <span class="sender">${esc(row.sender)}</span>
      <span class="text">${esc(row.text)}</span>
    </div>`,
    )
    .join('');
  const tail = streamEnded ? `<div class="stream-end">stream ended</div>` : '';
  el.innerHTML = body + tail;
}

export function renderNotFound(el: HTMLElement, runId: string): void {
  el.innerHTML = `
    <div class="not-found">
      <h2>Unknown run</h2>
      <p>No run named <code>${esc(runId)}</code> on this server.</p>
      <a href="#/inbox">back to inbox</a>
    </div>
  `;
}

/* ── Resolution editor ── */

export interface EditorContext extends DraftContext {
  moduleNames: string[];
  moduleSource(name: string): { revision: number; sourceText: string } | null;
  propertyIds: string[];
  uncovered: string[];
  connectionLost(): boolean;
}

export interface EditorHandlers {
  onSubmit(draft: ResolutionDraft): void;
}

function gatingProblems(draft: ResolutionDraft, ctx: EditorContext): string[] {
  const problems = draftProblems(draft, ctx);
  if (ctx.connectionLost()) problems.push('connection lost; cannot submit against stale state');
  return problems;
}

/** Recompute the problem list and submit gating without a full re-render. */
export function updateEditorValidation(el: HTMLElement, draft: ResolutionDraft, ctx: EditorContext): void {
  const problems = gatingProblems(draft, ctx);
  const list = el.querySelector<HTMLUListElement>('.problems');
  if (list) {
    list.innerHTML = problems.map((p) => `<li>${esc(p)}</li>`).join('');
  }
  const submit = el.querySelector<HTMLButtonElement>('.submit');
  if (submit) submit.disabled = problems.length > 0;
}

export function showSubmitError(el: HTMLElement, message: string, conflict: boolean): void {
  const box = el.querySelector<HTMLElement>('.submit-error');
  if (!box) return;
  box.className = conflict ? 'submit-error conflict-notice' : 'submit-error';
  box.innerHTML = conflict
    ? `<strong>conflict:</strong> ${esc(message)}`
    : esc(message);
}

export function clearSubmitError(el: HTMLElement): void {
  const box = el.querySelector<HTMLElement>('.submit-error');
  if (box) {
    box.className = 'submit-error';
    box.innerHTML = '';
  }
}

function kindFields(draft: ResolutionDraft, ctx: EditorContext): string {
  switch (draft.kind) {
    case 'patch-rtl': {
      const options = ctx.moduleNames
        .map((m) => `<option value="${esc(m)}" ${m === draft.moduleName ? 'selected' : ''}>${esc(m)}</option>`)
        .join('');
      const base = draft.moduleName ? ctx.moduleSource(draft.moduleName) : null;
      return `
        <label>module
          <select class="f-module"><option value="">choose…</option>${options}</select>
        </label>
        ${base ? `<div class="diff-base" data-revision="${base.revision}"><div class="base-head">base: revision ${base.revision}</div><pre>${esc(base.sourceText)}</pre></div>` : ''}
        <label>unified diff against the base above
          <textarea class="f-diff" rows="10" spellcheck="false">${esc(draft.diff)}</textarea>
        </label>
      `;
    }
    case 'replace-properties':
    case 'add-properties':
      return `
        <label>properties, one per line as <code>id :: body</code>
          <textarea class="f-properties" rows="6" spellcheck="false">${esc(
            draft.properties.map((p) => `${p.propertyId} :: ${p.bodyText}`).join('\n'),
          )}</textarea>
        </label>
      `;
    case 'remove-properties':
      return `
        <label>property ids to drop, comma or newline separated
          <textarea class="f-property-ids" rows="4" spellcheck="false">${esc(draft.propertyIds.join('\n'))}</textarea>
        </label>
        ${ctx.propertyIds.length ? `<div class="hint">known: ${ctx.propertyIds.map((x) => esc(x)).join(', ')}</div>` : ''}
      `;
    case 'waive-unreachable':
      return `
        <label>locations to waive, comma or newline separated
          <textarea class="f-waived" rows="4" spellcheck="false">${esc(draft.waivedLocations.join('\n'))}</textarea>
        </label>
        ${ctx.uncovered.length ? `<div class="hint">uncovered: ${ctx.uncovered.map((x) => esc(x)).join(', ')}</div>` : ''}
      `;
    case 'edit-spec':
      return `
        <label>replacement design text
          <textarea class="f-spec" rows="12" spellcheck="false">${esc(draft.specText)}</textarea>
        </label>
      `;
    case 'abort':
      return `<div class="hint">aborting stops the run; only reviewer and effort are recorded</div>`;
  }
}

export function renderEditor(
  el: HTMLElement,
  draft: ResolutionDraft,
  ctx: EditorContext,
  handlers: EditorHandlers,
): void {
  const kindOptions = RESOLUTION_KINDS.map(
    (k) => `<option value="${k}" ${k === draft.kind ? 'selected' : ''}>${k}</option>`,
  ).join('');
  el.innerHTML = `
    <form class="editor">
      <div class="editor-row">
        <label>resolution
          <select class="f-kind">${kindOptions}</select>
        </label>
        <label>reviewer
          <input class="f-reviewer" type="text" value="${esc(draft.reviewer)}" />
        </label>
        <label>effort (minutes)
          <input class="f-minutes" type="number" min="0" step="1" value="${draft.effortMinutes ?? ''}" />
        </label>
      </div>
      <div class="kind-fields">${kindFields(draft, ctx)}</div>
      <label>note (optional)
        <input class="f-note" type="text" value="${esc(draft.note)}" />
      </label>
      <ul class="problems"></ul>
      <div class="submit-error"></div>
      <button type="submit" class="submit">submit resolution</button>
    </form>
  `;

  const form = el.querySelector<HTMLFormElement>('form.editor')!;
  const revalidate = () => updateEditorValidation(el, draft, ctx);

  // selected attributes in markup are not reliably honored everywhere;
  // sync the selects from the draft explicitly
  form.querySelector<HTMLSelectElement>('.f-kind')!.value = draft.kind;
  const moduleSelect = form.querySelector<HTMLSelectElement>('.f-module');
  if (moduleSelect) moduleSelect.value = draft.moduleName;

  form.querySelector<HTMLSelectElement>('.f-kind')!.addEventListener('change', (ev) => {
    draft.kind = (ev.target as HTMLSelectElement).value as ResolutionKind;
    renderEditor(el, draft, ctx, handlers);
  });
  form.querySelector<HTMLInputElement>('.f-reviewer')!.addEventListener('input', (ev) => {
    draft.reviewer = (ev.target as HTMLInputElement).value;
    revalidate();
  });
  form.querySelector<HTMLInputElement>('.f-minutes')!.addEventListener('input', (ev) => {
    const raw = (ev.target as HTMLInputElement).value.trim();
    draft.effortMinutes = raw === '' ? null : Number(raw);
    revalidate();
  });
  form.querySelector<HTMLInputElement>('.f-note')!.addEventListener('input', (ev) => {
    draft.note = (ev.target as HTMLInputElement).value;
    revalidate();
  });

  const moduleSel = form.querySelector<HTMLSelectElement>('.f-module');
  moduleSel?.addEventListener('change', (ev) => {
    draft.moduleName = (ev.target as HTMLSelectElement).value;
    const base = draft.moduleName ? ctx.moduleSource(draft.moduleName) : null;
    // pin the revision the diff is written against, so a concurrent
    // artifact update is caught here instead of as a server-side 422
    draft.diffBaseRevision = base ? base.revision : null;
    renderEditor(el, draft, ctx, handlers);
  });
  form.querySelector<HTMLTextAreaElement>('.f-diff')?.addEventListener('input', (ev) => {
    draft.diff = (ev.target as HTMLTextAreaElement).value;
    revalidate();
  });
  form.querySelector<HTMLTextAreaElement>('.f-properties')?.addEventListener('input', (ev) => {
    draft.properties = (ev.target as HTMLTextAreaElement).value
      .split('\n')
      .map((line) => line.trim())
      .filter((line) => line.length > 0)
      .map((line) => {
        const cut = line.indexOf('::');
        return cut < 0
          ? { propertyId: line, bodyText: '' }
          : { propertyId: line.slice(0, cut).trim(), bodyText: line.slice(cut + 2).trim() };
      });
    revalidate();
  });
  form.querySelector<HTMLTextAreaElement>('.f-property-ids')?.addEventListener('input', (ev) => {
    draft.propertyIds = splitIdList((ev.target as HTMLTextAreaElement).value);
    revalidate();
  });
  form.querySelector<HTMLTextAreaElement>('.f-waived')?.addEventListener('input', (ev) => {
    draft.waivedLocations = splitIdList((ev.target as HTMLTextAreaElement).value);
    revalidate();
  });
  form.querySelector<HTMLTextAreaElement>('.f-spec')?.addEventListener('input', (ev) => {
    draft.specText = (ev.target as HTMLTextAreaElement).value;
    revalidate();
  });

  form.addEventListener('submit', (ev) => {
    ev.preventDefault();
    if (gatingProblems(draft, ctx).length > 0) return;
    handlers.onSubmit(draft);
  });

  revalidate();
}

/* ── Escalation panel: open tickets with inline editors ── */

export function renderTicketPanel(
  el: HTMLElement,
  tickets: TicketInfo[],
  editorMount: (ticketEl: HTMLElement, ticket: TicketInfo) => void,
): void {
  const open = tickets.filter((t) => t.status === 'open');
  if (open.length === 0) {
    el.innerHTML = '';
    return;
  }
  el.innerHTML = open
    .map(
      (t) => `
    <section class="ticket" id="ticket-${esc(t.ticketId)}" data-ticket="${esc(t.ticketId)}">
      <div class="ticket-head">
        <span class="ticket-id">${esc(t.ticketId)}</span>
        <span class="badge trigger">${esc(t.trigger)}</span>
      </div>
      <div class="ticket-summary">${esc(t.summary)}</div>
      <div class="editor-mount"></div>
    </section>`,
    )
    .join('');
  for (const t of open) {
    const host = el.querySelector<HTMLElement>(`.ticket[data-ticket="${t.ticketId}"] .editor-mount`);
    if (host) editorMount(host, t);
  }
}
