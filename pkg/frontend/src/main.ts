// App shell: hash routing, inbox polling, run streaming, editor wiring.
// State lives here; api.ts talks to the server and views.ts paints.

import { ApiError, GatewayClient } from './api.js';
import { describeEvent, RunModel, type TicketInfo } from './model.js';
import { emptyDraft, toWire, type ResolutionDraft, type ResolutionKind } from './drafts.js';
import {
  clearSubmitError,
  renderBanner,
  renderEditor,
  renderGauge,
  renderInbox,
  renderNotFound,
  renderRunHeader,
  renderTicketPanel,
  renderTranscript,
  showSubmitError,
  updateEditorValidation,
  type EditorContext,
  type InboxItem,
} from './views.js';

const BASE_KEY = 'tapeloop-console-base';
const DEFAULT_BASE = 'http://127.0.0.1:8734';
const INBOX_POLL_MS = 800;

function startingKind(trigger: string): ResolutionKind {
  switch (trigger) {
    case 'zero-progress-coverage':
      return 'remove-properties';
    case 'step-budget':
      return 'abort';
    default:
      return 'patch-rtl';
  }
}

export class ConsoleApp {
  private client: GatewayClient;
  private teardown: (() => void) | null = null;
  private bannerEl!: HTMLElement;
  private viewEl!: HTMLElement;

  constructor(
    private readonly win: Window,
    private readonly root: HTMLElement,
  ) {
    this.client = new GatewayClient(this.baseUrl());
  }

  baseUrl(): string {
    try {
      return this.win.localStorage.getItem(BASE_KEY) ?? DEFAULT_BASE;
    } catch {
      return DEFAULT_BASE;
    }
  }

  private setBaseUrl(url: string): void {
    try {
      this.win.localStorage.setItem(BASE_KEY, url);
    } catch {
      // storage may be unavailable; the client below still switches
    }
    this.client = new GatewayClient(url);
    this.route();
  }

  start(): void {
    this.root.innerHTML = `
      <header class="top">
        <h1><a href="#/inbox">tapeloop console</a></h1>
        <div class="base-ctl">
          <input class="base-url" type="text" value="${this.baseUrl()}" spellcheck="false" />
          <button class="apply-base">connect</button>
        </div>
      </header>
      <div class="banner"></div>
      <main class="view"></main>
    `;
    this.bannerEl = this.root.querySelector<HTMLElement>('.banner')!;
    this.viewEl = this.root.querySelector<HTMLElement>('.view')!;
    const input = this.root.querySelector<HTMLInputElement>('.base-url')!;
    this.root.querySelector<HTMLButtonElement>('.apply-base')!.addEventListener('click', () => {
      this.setBaseUrl(input.value.trim().replace(/\/$/, ''));
    });
    this.win.addEventListener('hashchange', () => this.route());
    this.route();
  }

  stop(): void {
    this.teardown?.();
    this.teardown = null;
  }

  route(): void {
    this.stop();
    const hash = this.win.location.hash || '#/inbox';
    const runMatch = /^#\/runs\/([^/]+)$/.exec(hash);
    if (runMatch) this.showRun(decodeURIComponent(runMatch[1]!));
    else this.showInbox();
  }

  /* ── Inbox ── */

  private showInbox(): void {
    this.viewEl.innerHTML = `
      <section class="inbox">
        <h2>Escalations</h2>
        <div class="inbox-list"><div class="empty-state">loading…</div></div>
      </section>
    `;
    const listEl = this.viewEl.querySelector<HTMLElement>('.inbox-list')!;
    let lost = false;
    let stopped = false;

    const poll = async () => {
      try {
        const tickets = await this.client.openEscalations();
        const runs = await this.client.listRuns();
        const byId = new Map(runs.map((r) => [r.run_id, r]));
        const items: InboxItem[] = [];
        for (const ticket of tickets) {
          const run = byId.get(ticket.run_id);
          if (!run) continue;
          let excerpt: string[] = [];
          try {
            const from = Math.max(1, (run.latest_seq ?? 1) - 2);
            const page = await this.client.eventPage(ticket.run_id, from, 3);
            excerpt = page.events.map((e) => describeEvent(e));
          } catch {
            // the card works without its excerpt
          }
          items.push({ ticket, run, excerpt });
        }
        if (stopped) return;
        lost = false;
        renderInbox(listEl, items);
      } catch {
        if (stopped) return;
        lost = true; // keep the last list on screen, flagged stale
      }
      renderBanner(this.bannerEl, lost, () => void poll());
    };

    void poll();
    const timer = setInterval(() => void poll(), INBOX_POLL_MS);
    this.teardown = () => {
      stopped = true;
      clearInterval(timer);
      renderBanner(this.bannerEl, false, () => {});
    };
  }

  /* ── Run page ── */

  private showRun(runId: string): void {
    this.viewEl.innerHTML = `
      <section class="run">
        <div class="run-header"></div>
        <div class="gauge-slot"></div>
        <div class="tickets"></div>
        <h3>Transcript</h3>
        <div class="transcript"></div>
      </section>
    `;
    const headerEl = this.viewEl.querySelector<HTMLElement>('.run-header')!;
    const gaugeEl = this.viewEl.querySelector<HTMLElement>('.gauge-slot')!;
    const panelEl = this.viewEl.querySelector<HTMLElement>('.tickets')!;
    const transcriptEl = this.viewEl.querySelector<HTMLElement>('.transcript')!;

    const model = new RunModel();
    const drafts = new Map<string, ResolutionDraft>();
    const hosts = new Map<string, HTMLElement>();
    let lost = false;
    let panelSig = '';

    const ctx: EditorContext = {
      currentRevision: (name) => model.artifacts.get(name)?.revision ?? null,
      get moduleNames() {
        return [...model.artifacts.keys()];
      },
      moduleSource: (name) => {
        const a = model.artifacts.get(name);
        return a ? { revision: a.revision, sourceText: a.sourceText } : null;
      },
      get propertyIds() {
        return [...model.propertyIds];
      },
      get uncovered() {
        return model.coverage?.uncovered ?? [];
      },
      connectionLost: () => lost,
    };

    const mountEditor = (host: HTMLElement, ticket: TicketInfo) => {
      let draft = drafts.get(ticket.ticketId);
      if (!draft) {
        draft = emptyDraft(startingKind(ticket.trigger));
        drafts.set(ticket.ticketId, draft);
      }
      hosts.set(ticket.ticketId, host);
      renderEditor(host, draft, ctx, {
        onSubmit: (d) => void this.submit(runId, ticket.ticketId, d, host),
      });
    };

    const paint = () => {
      renderRunHeader(headerEl, {
        runId,
        designId: model.designId,
        status: model.status,
        phase: model.phase,
        blockingTicket: model.openTickets[0]?.ticketId ?? null,
      });
      renderGauge(gaugeEl, model.coveragePct, model.coverageTargetPct);
      renderTranscript(transcriptEl, model.transcript, model.terminal);
      const sig = model.openTickets.map((t) => t.ticketId).join(',');
      if (sig !== panelSig) {
        panelSig = sig;
        const openIds = new Set(model.openTickets.map((t) => t.ticketId));
        for (const id of [...drafts.keys()]) {
          if (!openIds.has(id)) {
            drafts.delete(id);
            hosts.delete(id);
          }
        }
        renderTicketPanel(panelEl, [...model.tickets.values()], mountEditor);
      } else {
        for (const [id, host] of hosts) {
          const draft = drafts.get(id);
          if (draft) updateEditorValidation(host, draft, ctx);
        }
      }
      renderBanner(this.bannerEl, lost, () => {});
    };

    const controller = new AbortController();
    this.teardown = () => {
      controller.abort();
      renderBanner(this.bannerEl, false, () => {});
    };

    void this.client
      .streamEvents(runId, 1, (event) => {
        model.apply(event);
        paint();
      }, {
        signal: controller.signal,
        onConnection: (up) => {
          lost = !up;
          paint();
        },
      })
      .catch((err) => {
        if (err instanceof ApiError && err.status === 404) {
          renderNotFound(this.viewEl, runId);
          return;
        }
        lost = true;
        paint();
      });
  }

  private async submit(
    runId: string,
    ticketId: string,
    draft: ResolutionDraft,
    host: HTMLElement,
  ): Promise<void> {
    clearSubmitError(host);
    const button = host.querySelector<HTMLButtonElement>('.submit');
    if (button) button.disabled = true;
    try {
      await this.client.submitResolution(runId, ticketId, toWire(draft));
      // accepted; the editor disappears when resolution-applied streams in
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        showSubmitError(host, err.detail, true);
      } else if (err instanceof ApiError) {
        showSubmitError(host, err.detail, false);
        if (button) button.disabled = false;
      } else {
        showSubmitError(host, String(err), false);
        if (button) button.disabled = false;
      }
    }
  }
}

declare const document: Document | undefined;

// Browser entry point; tests construct the app against a synthetic window.
if (typeof document !== 'undefined' && document.querySelector('#app')) {
  const app = new ConsoleApp(window, document.querySelector<HTMLElement>('#app')!);
  app.start();
}
