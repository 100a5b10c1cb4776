import { afterEach, describe, expect, it, vi } from 'vitest';

import { ApiError, GatewayClient, SseParser, type BusEvent } from '../src/api.js';

describe('SseParser', () => {
  it('parses a whole frame', () => {
    const parser = new SseParser();
    const frames = parser.push('id: 7\nevent: lifecycle\ndata: {"seq": 7}\n\n');
    expect(frames).toEqual([{ id: '7', event: 'lifecycle', data: '{"seq": 7}' }]);
  });

  it('buffers frames split anywhere, even mid-line', () => {
    const parser = new SseParser();
    expect(parser.push('id: 1\neve')).toEqual([]);
    expect(parser.push('nt: tool\ndata: {"a"')).toEqual([]);
    const frames = parser.push(': 1}\n\nid: 2\nevent: chat\ndata: {}\n\n');
    expect(frames).toEqual([
      { id: '1', event: 'tool', data: '{"a": 1}' },
      { id: '2', event: 'chat', data: '{}' },
    ]);
  });

  it('ignores keep-alive comment frames', () => {
    const parser = new SseParser();
    expect(parser.push(': keep-alive\n\n')).toEqual([]);
    expect(parser.push(': keep-alive\n\nid: 3\ndata: x\n\n')).toEqual([
      { id: '3', event: '', data: 'x' },
    ]);
  });

  it('joins multiple data lines with newlines', () => {
    const parser = new SseParser();
    const frames = parser.push('data: line1\ndata: line2\n\n');
    expect(frames[0]!.data).toBe('line1\nline2');
  });

  it('flush yields a trailing unterminated frame', () => {
    const parser = new SseParser();
    expect(parser.push('id: 9\ndata: tail')).toEqual([]);
    expect(parser.flush()).toEqual([{ id: '9', event: '', data: 'tail' }]);
    expect(parser.flush()).toEqual([]);
  });
});

function busEvent(seq: number, type: string): BusEvent {
  return {
    seq,
    granularity: 'lifecycle',
    sender: 'executor',
    topic: 'run/r1/lifecycle',
    payload: { type },
    state_hash_after: `h${seq}`,
  };
}

function sseBody(events: BusEvent[]): ReadableStream<Uint8Array> {
  const encoder = new TextEncoder();
  return new ReadableStream({
    start(controller) {
      controller.enqueue(encoder.encode(': keep-alive\n\n'));
      for (const e of events) {
        const frame = `id: ${e.seq}\nevent: ${e.granularity}\ndata: ${JSON.stringify(e)}\n\n`;
        controller.enqueue(encoder.encode(frame));
      }
      controller.close();
    },
  });
}

describe('GatewayClient', () => {
  afterEach(() => vi.unstubAllGlobals());

  it('decodes JSON replies', async () => {
    vi.stubGlobal(
      'fetch',
      vi.fn(async () => new Response(JSON.stringify({ ok: true, runs: 2 }), { status: 200 })),
    );
    const client = new GatewayClient('http://host');
    expect(await client.health()).toEqual({ ok: true, runs: 2 });
  });

  it('raises ApiError carrying the status and detail', async () => {
    vi.stubGlobal(
      'fetch',
      vi.fn(
        async () =>
          new Response(JSON.stringify({ detail: 'ticket already resolved' }), { status: 409 }),
      ),
    );
    const client = new GatewayClient('http://host');
    const err = await client.getRun('r1').catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(409);
    expect((err as ApiError).detail).toBe('ticket already resolved');
  });

  it('POSTs resolutions to the ticket endpoint', async () => {
    const calls: Array<{ url: string; init: RequestInit | undefined }> = [];
    vi.stubGlobal(
      'fetch',
      vi.fn(async (url: string, init?: RequestInit) => {
        calls.push({ url, init });
        return new Response(JSON.stringify({ run_id: 'r1', ticket_id: 'T1', accepted: true }), {
          status: 200,
        });
      }),
    );
    const client = new GatewayClient('http://host');
    const wire = { kind: 'abort', reviewer: 'lead', effort_minutes: 0 };
    await client.submitResolution('r1', 'T1', wire);
    expect(calls).toHaveLength(1);
    expect(calls[0]!.url).toBe('http://host/runs/r1/escalations/T1/resolution');
    expect(calls[0]!.init?.method).toBe('POST');
    expect(JSON.parse(String(calls[0]!.init?.body))).toEqual(wire);
  });

  it('streams events in order and resumes from the cursor after a drop', async () => {
    const urls: string[] = [];
    const first = [busEvent(1, 'run-created'), busEvent(2, 'phase-entered')];
    const second = [busEvent(3, 'signed-off')];
    vi.stubGlobal(
      'fetch',
      vi.fn(async (url: string) => {
        urls.push(url);
        // first reply closes without a terminal event, forcing a resume
        const body = urls.length === 1 ? sseBody(first) : sseBody(second);
        return new Response(body, { status: 200 });
      }),
    );
    const client = new GatewayClient('http://host');
    const seen: number[] = [];
    const last = await client.streamEvents('r1', 1, (e) => seen.push(e.seq));
    expect(seen).toEqual([1, 2, 3]);
    expect(last).toBe(3);
    expect(urls[0]).toContain('from=1');
    expect(urls[1]).toContain('from=3');
  });

  it('stops cleanly at a terminal event without reconnecting', async () => {
    const fetchMock = vi.fn(async () =>
      new Response(sseBody([busEvent(1, 'run-created'), busEvent(2, 'run-aborted')]), {
        status: 200,
      }),
    );
    vi.stubGlobal('fetch', fetchMock);
    const client = new GatewayClient('http://host');
    const seen: number[] = [];
    await client.streamEvents('r1', 1, (e) => seen.push(e.seq));
    expect(seen).toEqual([1, 2]);
    expect(fetchMock).toHaveBeenCalledTimes(1);
  });

  it('rejects with 404 for an unknown run', async () => {
    vi.stubGlobal(
      'fetch',
      vi.fn(async () => new Response(JSON.stringify({ detail: 'no such run' }), { status: 404 })),
    );
    const client = new GatewayClient('http://host');
    const err = await client.streamEvents('nope', 1, () => {}).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(404);
  });

  it('reports connection state transitions to the hook', async () => {
    let failedOnce = false;
    vi.stubGlobal(
      'fetch',
      vi.fn(async () => {
        if (!failedOnce) {
          failedOnce = true;
          throw new TypeError('fetch failed');
        }
        return new Response(sseBody([busEvent(1, 'run-created'), busEvent(2, 'run-aborted')]), {
          status: 200,
        });
      }),
    );
    const client = new GatewayClient('http://host');
    const transitions: boolean[] = [];
    await client.streamEvents('r1', 1, () => {}, {
      onConnection: (up) => transitions.push(up),
    });
    expect(transitions).toEqual([false, true]);
  });
});
