// Client-side fold over a run's event stream. The server is the source of
// truth; this model only mirrors what the events say, in order, so the
// transcript and gauges can never drift from the log.

import type { BusEvent } from './api.js';

export class SeqGapError extends Error {
  constructor(expected: number, got: number) {
    super(`expected seq ${expected}, got ${got}`);
  }
}

export type RunStatus = 'starting' | 'running' | 'blocked-hitl' | 'signed-off' | 'aborted';

export interface TranscriptRow {
  seq: number;
  granularity: string;
  sender: string;
  kind: string;
  text: string;
}

export interface TicketInfo {
  ticketId: string;
  trigger: string;
  summary: string;
  context: Record<string, unknown>;
  status: 'open' | 'resolved';
  resolutionKind: string | null;
}

export interface CoverageSnapshot {
  codePct: number;
  assertionPct: number;
  functionalPct: number;
  uncovered: string[];
  waived: string[];
}

export interface ArtifactInfo {
  moduleName: string;
  revision: number;
  sourceText: string;
}

interface CoveragePayload {
  snapshot: {
    code_pct: number;
    assertion_pct: number;
    functional_pct: number;
    uncovered: string[];
    unreachable_waived: string[];
  };
}

/** One-line rendering of an event for the transcript pane. */
export function describeEvent(event: BusEvent): string {
  const p = event.payload as Record<string, any>;
  switch (p.type) {
    case 'run-created':
      return `run created for ${p.spec?.design_id ?? '?'}`;
    case 'phase-entered':
      return `entered phase ${p.phase}`;
    case 'deliberation-started':
      return `${p.proposer} proposing ${p.task_id} (critics: ${(p.critics ?? []).join(', ')})`;
    case 'proposal':
      return `${p.role_id} proposal for ${p.task_id} #${p.iteration}`;
    case 'critique': {
      const n = (p.issues ?? []).length;
      return `${p.role_id}: ${p.verdict}${n ? ` (${n} issue${n === 1 ? '' : 's'})` : ''}`;
    }
    case 'deliberation-finished':
      return `${p.task_id} ${p.accepted ? 'accepted' : 'rejected'} after ${p.iterations_used} iteration(s)`;
    case 'artifact-accepted':
      return p.kind === 'rtl'
        ? `rtl ${p.data?.module_name} rev ${p.data?.revision}`
        : `${p.kind} accepted`;
    case 'property-updated':
      return `property ${p.property_id} updated`;
    case 'properties-reset':
      return `reset ${(p.property_ids ?? []).length} properties`;
    case 'tool-report':
      return `${p.kind} report`;
    case 'tool-failed':
      return `${p.kind} tool failed: ${p.detail}`;
    case 'design-review':
      return `review #${p.review_no}: functional=${p.functional_pass} synthesizable=${p.synthesizable}`;
    case 'gate-checked':
      return p.passed ? 'gate passed' : `gate blocked: ${(p.reasons ?? []).join('; ')}`;
    case 'coverage-round':
      return `coverage round ${p.round}: +${(p.added ?? []).length} properties`;
    case 'ticket-opened':
      return `ticket ${p.ticket?.ticket_id}: ${p.ticket?.summary}`;
    case 'resolution-applied':
      return `ticket ${p.ticket_id} resolved (${p.resolution?.kind})`;
    case 'tasks-dispatched':
      return `dispatched ${(p.blocks ?? []).length} rtl block(s)`;
    case 'signed-off':
      return 'signed off';
    case 'run-aborted':
      return `aborted: ${p.reason}`;
    default:
      return String(p.type ?? event.topic);
  }
}

export class RunModel {
  runId = '';
  designId = '';
  status: RunStatus = 'starting';
  phase: string | null = null;
  lastSeq = 0;
  transcript: TranscriptRow[] = [];
  tickets = new Map<string, TicketInfo>();
  coverage: CoverageSnapshot | null = null;
  coverageTargetPct: number | null = null;
  artifacts = new Map<string, ArtifactInfo>();
  propertyIds = new Set<string>();
  report: Record<string, unknown> | null = null;
  abortReason: string | null = null;

  get terminal(): boolean {
    return this.status === 'signed-off' || this.status === 'aborted';
  }

  get openTickets(): TicketInfo[] {
    return [...this.tickets.values()].filter((t) => t.status === 'open');
  }

  /** Gauge value: worst of the three coverage axes, or the report's final figure. */
  get coveragePct(): number | null {
    if (this.report) {
      const cov = (this.report as { coverage?: { effective_pct?: number } }).coverage;
      if (cov && typeof cov.effective_pct === 'number') return cov.effective_pct;
    }
    if (!this.coverage) return null;
    return Math.min(this.coverage.codePct, this.coverage.assertionPct, this.coverage.functionalPct);
  }

  /**
   * Fold one event into the model. Events must arrive in exact sequence
   * order; a gap means the stream layer dropped or reordered something,
   * which the UI must refuse to paper over.
   */
  apply(event: BusEvent): void {
    if (event.seq !== this.lastSeq + 1) throw new SeqGapError(this.lastSeq + 1, event.seq);
    this.lastSeq = event.seq;
    const p = event.payload as Record<string, any>;
    switch (p.type) {
      case 'run-created':
        this.runId = p.run_id;
        this.designId = p.spec?.design_id ?? '';
        this.status = 'running';
        this.coverageTargetPct = p.config?.coverage_target_pct ?? null;
        break;
      case 'phase-entered':
        this.phase = p.phase;
        break;
      case 'artifact-accepted':
        if (p.kind === 'rtl') {
          this.artifacts.set(p.data.module_name, {
            moduleName: p.data.module_name,
            revision: p.data.revision,
            sourceText: p.data.source_text,
          });
        } else if (p.kind === 'properties') {
          for (const prop of p.properties ?? []) this.propertyIds.add(prop.property_id);
        }
        break;
      case 'property-updated':
        this.propertyIds.add(p.property_id);
        break;
      case 'properties-reset':
        break;
      case 'tool-report':
        if (p.kind === 'coverage' && p.parsed?.snapshot) {
          const s = (p.parsed as CoveragePayload).snapshot;
          this.coverage = {
            codePct: s.code_pct,
            assertionPct: s.assertion_pct,
            functionalPct: s.functional_pct,
            uncovered: [...s.uncovered],
            waived: [...s.unreachable_waived],
          };
        }
        break;
      case 'ticket-opened': {
        const t = p.ticket;
        this.tickets.set(t.ticket_id, {
          ticketId: t.ticket_id,
          trigger: t.trigger,
          summary: t.summary,
          context: t.context ?? {},
          status: 'open',
          resolutionKind: null,
        });
        this.status = 'blocked-hitl';
        break;
      }
      case 'resolution-applied': {
        const t = this.tickets.get(p.ticket_id);
        if (t) {
          t.status = 'resolved';
          t.resolutionKind = p.resolution?.kind ?? null;
        }
        // a patch lands without its own artifact event; the new source
        // rides on the resolution, and the revision advances with it
        if (p.resolution?.kind === 'patch-rtl' && p.resolution.module_name) {
          const current = this.artifacts.get(p.resolution.module_name);
          if (current) {
            current.revision += 1;
            if (typeof p.effects?.new_source === 'string') {
              current.sourceText = p.effects.new_source;
            }
          }
        }
        if (p.resolution?.kind === 'remove-properties') {
          for (const id of p.resolution.property_ids ?? []) this.propertyIds.delete(id);
        }
        if (p.resolution?.kind === 'add-properties' || p.resolution?.kind === 'replace-properties') {
          for (const prop of p.resolution.properties ?? []) this.propertyIds.add(prop.property_id);
        }
        if (this.openTickets.length === 0 && this.status === 'blocked-hitl') {
          this.status = 'running';
        }
        break;
      }
      case 'signed-off':
        this.status = 'signed-off';
        this.report = p.report ?? null;
        break;
      case 'run-aborted':
        this.status = 'aborted';
        this.abortReason = p.reason ?? null;
        break;
      default:
        break;
    }
    this.transcript.push({
      seq: event.seq,
      granularity: event.granularity,
      sender: event.sender,
      kind: String(p.type ?? ''),
      text: describeEvent(event),
    });
  }
}
