import { describe, expect, it } from 'vitest';

import type { BusEvent } from '../src/api.js';
import { RunModel, SeqGapError, describeEvent } from '../src/model.js';

function ev(
  seq: number,
  payload: Record<string, unknown>,
  granularity: BusEvent['granularity'] = 'lifecycle',
  sender = 'executor',
): BusEvent {
  return {
    seq,
    granularity,
    sender,
    topic: 'run/r1/lifecycle',
    payload,
    state_hash_after: `h${seq}`,
  };
}

function coverageReport(seq: number, code: number, assertion: number, functional: number): BusEvent {
  return ev(
    seq,
    {
      type: 'tool-report',
      kind: 'coverage',
      report_text: 'COVERAGE-REPORT …',
      parsed: {
        snapshot: {
          code_pct: code,
          assertion_pct: assertion,
          functional_pct: functional,
          uncovered: ['crc_core.sv:44', 'crc_core.sv:61'],
          unreachable_waived: [],
        },
      },
    },
    'tool',
    'coverage-sim',
  );
}

const CREATED = ev(1, {
  type: 'run-created',
  run_id: 'r1',
  spec: { design_id: 'crc' },
  config: { coverage_target_pct: 95.0 },
  definition_hash: 'abc',
});

describe('RunModel', () => {
  it('starts empty and turns running on run-created', () => {
    const model = new RunModel();
    expect(model.status).toBe('starting');
    model.apply(CREATED);
    expect(model.status).toBe('running');
    expect(model.runId).toBe('r1');
    expect(model.designId).toBe('crc');
    expect(model.coverageTargetPct).toBe(95.0);
  });

  it('rejects a sequence gap instead of papering over it', () => {
    const model = new RunModel();
    model.apply(CREATED);
    expect(() => model.apply(ev(3, { type: 'phase-entered', phase: 'development' }))).toThrow(
      SeqGapError,
    );
    expect(() => model.apply(ev(2, { type: 'phase-entered', phase: 'development' }))).not.toThrow();
  });

  it('rejects replayed events too', () => {
    const model = new RunModel();
    model.apply(CREATED);
    expect(() => model.apply(CREATED)).toThrow(/expected seq 2, got 1/);
  });

  it('tracks phase and rtl artifact revisions', () => {
    const model = new RunModel();
    model.apply(CREATED);
    model.apply(ev(2, { type: 'phase-entered', phase: 'development' }));
    expect(model.phase).toBe('development');
    model.apply(
      ev(3, {
        type: 'artifact-accepted',
        kind: 'rtl',
        data: { module_name: 'crc_engine', revision: 1, source_text: 'module crc_engine; endmodule' },
        raw_text: '…',
      }),
    );
    model.apply(
      ev(4, {
        type: 'artifact-accepted',
        kind: 'rtl',
        data: { module_name: 'crc_engine', revision: 2, source_text: 'module crc_engine2; endmodule' },
        raw_text: '…',
      }),
    );
    expect(model.artifacts.get('crc_engine')?.revision).toBe(2);
    expect(model.artifacts.get('crc_engine')?.sourceText).toContain('crc_engine2');
  });

  it('gauges coverage as the worst of the three axes', () => {
    const model = new RunModel();
    model.apply(CREATED);
    expect(model.coveragePct).toBeNull();
    model.apply(coverageReport(2, 81.25, 73.08, 76.92));
    expect(model.coveragePct).toBe(73.08);
    expect(model.coverage?.uncovered).toEqual(['crc_core.sv:44', 'crc_core.sv:61']);
  });

  it('blocks on ticket-opened and resumes when the resolution lands', () => {
    const model = new RunModel();
    model.apply(CREATED);
    model.apply(
      ev(2, {
        type: 'ticket-opened',
        ticket: {
          ticket_id: 'T1',
          trigger: 'deliberation-exhausted',
          summary: 'crc_engine stuck after 5 iterations',
          context: { task_id: 'rtl:crc_engine' },
          status: 'open',
          resolution: null,
        },
      }),
    );
    expect(model.status).toBe('blocked-hitl');
    expect(model.openTickets.map((t) => t.ticketId)).toEqual(['T1']);
    model.apply(
      ev(3, {
        type: 'resolution-applied',
        ticket_id: 'T1',
        resolution: { kind: 'patch-rtl', reviewer: 'hw-lead', effort_minutes: 15 },
        effects: {},
      }),
    );
    expect(model.status).toBe('running');
    expect(model.openTickets).toEqual([]);
    expect(model.tickets.get('T1')?.resolutionKind).toBe('patch-rtl');
  });

  it('prefers the sign-off report figure for the gauge and turns terminal', () => {
    const model = new RunModel();
    model.apply(CREATED);
    model.apply(coverageReport(2, 92.1, 88.4, 90.0));
    model.apply(
      ev(3, {
        type: 'signed-off',
        report: { coverage: { effective_pct: 100.0, target_pct: 95.0 } },
      }),
    );
    expect(model.status).toBe('signed-off');
    expect(model.terminal).toBe(true);
    expect(model.coveragePct).toBe(100.0);
  });

  it('turns aborted with the recorded reason', () => {
    const model = new RunModel();
    model.apply(CREATED);
    model.apply(ev(2, { type: 'run-aborted', reason: 'abort-requested' }));
    expect(model.status).toBe('aborted');
    expect(model.terminal).toBe(true);
    expect(model.abortReason).toBe('abort-requested');
  });

  it('keeps the transcript in exact sequence order', () => {
    const model = new RunModel();
    model.apply(CREATED);
    model.apply(ev(2, { type: 'phase-entered', phase: 'development' }));
    model.apply(coverageReport(3, 81.25, 73.08, 76.92));
    expect(model.transcript.map((r) => r.seq)).toEqual([1, 2, 3]);
    expect(model.transcript.every((r) => r.text.length > 0)).toBe(true);
  });

  it('collects property ids as they are introduced', () => {
    const model = new RunModel();
    model.apply(CREATED);
    model.apply(ev(2, { type: 'property-updated', property_id: 'crc_p1', body_text: '…' }));
    model.apply(ev(3, { type: 'property-updated', property_id: 'crc_p2', body_text: '…' }));
    expect([...model.propertyIds].sort()).toEqual(['crc_p1', 'crc_p2']);
  });

  it('collects ids from property batches and drops removed ones', () => {
    const model = new RunModel();
    model.apply(CREATED);
    model.apply(
      ev(2, {
        type: 'artifact-accepted',
        kind: 'properties',
        entry_id: 'E1',
        provenance: 'agent-generated',
        properties: [
          { property_id: 'crc_p01', body_text: '…' },
          { property_id: 'crc_p02', body_text: '…' },
        ],
      }),
    );
    expect([...model.propertyIds].sort()).toEqual(['crc_p01', 'crc_p02']);
    model.apply(
      ev(3, {
        type: 'ticket-opened',
        ticket: { ticket_id: 'T1', trigger: 'zero-progress-coverage', summary: 's', context: {}, status: 'open', resolution: null },
      }),
    );
    model.apply(
      ev(4, {
        type: 'resolution-applied',
        ticket_id: 'T1',
        resolution: { kind: 'remove-properties', reviewer: 'v', effort_minutes: 1, property_ids: ['crc_p02'] },
        effects: {},
      }),
    );
    expect([...model.propertyIds]).toEqual(['crc_p01']);
  });

  it('advances the artifact revision when a patch resolution lands', () => {
    const model = new RunModel();
    model.apply(CREATED);
    model.apply(
      ev(2, {
        type: 'artifact-accepted',
        kind: 'rtl',
        data: { module_name: 'crc_engine', revision: 1, source_text: 'module a; endmodule' },
        raw_text: '…',
      }),
    );
    model.apply(
      ev(3, {
        type: 'ticket-opened',
        ticket: { ticket_id: 'T1', trigger: 'deliberation-exhausted', summary: 's', context: {}, status: 'open', resolution: null },
      }),
    );
    model.apply(
      ev(4, {
        type: 'resolution-applied',
        ticket_id: 'T1',
        resolution: { kind: 'patch-rtl', reviewer: 'h', effort_minutes: 15, module_name: 'crc_engine', diff: '…' },
        effects: { new_source: 'module b; endmodule' },
      }),
    );
    const artifact = model.artifacts.get('crc_engine')!;
    expect(artifact.revision).toBe(2);
    expect(artifact.sourceText).toBe('module b; endmodule');
  });
});

describe('describeEvent', () => {
  it('renders one line per event type', () => {
    expect(describeEvent(CREATED)).toBe('run created for crc');
    expect(
      describeEvent(
        ev(2, {
          type: 'ticket-opened',
          ticket: { ticket_id: 'T1', summary: 'stuck', trigger: 'deliberation-exhausted' },
        }),
      ),
    ).toBe('ticket T1: stuck');
    expect(
      describeEvent(ev(3, { type: 'gate-checked', passed: false, reasons: ['open-tickets:1'] })),
    ).toBe('gate blocked: open-tickets:1');
    expect(describeEvent(ev(4, { type: 'gate-checked', passed: true, reasons: [] }))).toBe(
      'gate passed',
    );
    expect(
      describeEvent(
        ev(5, {
          type: 'critique',
          role_id: 'verif-1',
          verdict: 'revise',
          issues: [{ kind: 'latch', detail: '…' }],
        }, 'chat'),
      ),
    ).toBe('verif-1: revise (1 issue)');
    expect(describeEvent(ev(6, { type: 'run-aborted', reason: 'step-budget-exhausted' }))).toBe(
      'aborted: step-budget-exhausted',
    );
  });
});
