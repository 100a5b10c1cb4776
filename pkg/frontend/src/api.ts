// Typed client for the tapeloop gateway. The console talks to the server
// exclusively through this module; no view touches fetch directly.

export interface BusEvent {
  seq: number;
  granularity: 'lifecycle' | 'chat' | 'tool' | 'error';
  sender: string;
  topic: string;
  payload: Record<string, unknown>;
  state_hash_after: string;
}

export interface RunSummary {
  run_id: string;
  design_id: string;
  status: string;
  phase: string | null;
  events: number;
  latest_seq: number;
  error: string | null;
  open_ticket_count: number;
  open_tickets?: string[];
  coverage_pct?: number | null;
  coverage_target_pct?: number;
  properties?: number;
  tickets?: number;
  signed_off?: boolean;
  bucket?: string;
  temperature?: number;
  scenario?: string;
}

export interface TicketView {
  ticket_id: string;
  run_id: string;
  design_id: string;
  trigger: string;
  summary: string;
  context: Record<string, unknown>;
  status: 'open' | 'resolved';
  resolution: Record<string, unknown> | null;
}

export interface ScenarioInfo {
  name: string;
  path: string;
  design_id: string;
  description: string;
  expected_status: string;
}

export interface EventPage {
  run_id: string;
  events: BusEvent[];
  next_seq: number;
  total: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

function detailOf(body: unknown): string {
  if (body && typeof body === 'object' && 'detail' in body) {
    const d = (body as { detail: unknown }).detail;
    return typeof d === 'string' ? d : JSON.stringify(d);
  }
  return JSON.stringify(body);
}

export class GatewayClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const reply = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { 'content-type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await reply.text();
    const parsed: unknown = text ? JSON.parse(text) : null;
    if (!reply.ok) throw new ApiError(reply.status, detailOf(parsed));
    return parsed as T;
  }

  health(): Promise<{ ok: boolean; runs: number }> {
    return this.request('GET', '/health');
  }

  listScenarios(): Promise<ScenarioInfo[]> {
    return this.request('GET', '/scenarios');
  }

  listRuns(): Promise<RunSummary[]> {
    return this.request('GET', '/runs');
  }

  getRun(runId: string): Promise<RunSummary> {
    return this.request('GET', `/runs/${encodeURIComponent(runId)}`);
  }

  createRun(body: Record<string, unknown>): Promise<RunSummary> {
    return this.request('POST', '/runs', body);
  }

  abortRun(runId: string): Promise<{ run_id: string; aborting: boolean }> {
    return this.request('POST', `/runs/${encodeURIComponent(runId)}/abort`);
  }

  eventPage(runId: string, from = 1, limit = 500): Promise<EventPage> {
    const q = new URLSearchParams({ from: String(from), limit: String(limit) });
    return this.request('GET', `/runs/${encodeURIComponent(runId)}/events.json?${q}`);
  }

  report(runId: string): Promise<Record<string, unknown>> {
    return this.request('GET', `/runs/${encodeURIComponent(runId)}/report`);
  }

  openEscalations(): Promise<TicketView[]> {
    return this.request('GET', '/escalations?status=open');
  }

  runEscalations(runId: string): Promise<TicketView[]> {
    return this.request('GET', `/runs/${encodeURIComponent(runId)}/escalations`);
  }

  submitResolution(
    runId: string,
    ticketId: string,
    wire: Record<string, unknown>,
  ): Promise<{ run_id: string; ticket_id: string; accepted: boolean }> {
    const path = `/runs/${encodeURIComponent(runId)}/escalations/${encodeURIComponent(ticketId)}/resolution`;
    return this.request('POST', path, wire);
  }

  /**
   * Follow a run's event stream, replaying from `fromSeq`.
   *
   * The gateway speaks server-sent events; EventSource is useless here
   * because resuming needs a query parameter and node lacks the class, so
   * frames are parsed off the raw fetch body. Reconnects transparently
   * after network errors until a terminal event arrives or `signal`
   * aborts. Returns the last sequence number delivered.
   */
  async streamEvents(
    runId: string,
    fromSeq: number,
    onEvent: (event: BusEvent) => void,
    opts: { signal?: AbortSignal; onConnection?: (up: boolean) => void } = {},
  ): Promise<number> {
    const { signal, onConnection } = opts;
    let cursor = fromSeq;
    let terminal = false;
    while (!terminal && !signal?.aborted) {
      let reply: Response;
      try {
        reply = await fetch(
          `${this.baseUrl}/runs/${encodeURIComponent(runId)}/events?from=${cursor}`,
          { headers: { accept: 'text/event-stream' }, signal },
        );
      } catch (err) {
        if (signal?.aborted) break;
        onConnection?.(false);
        await sleep(300);
        continue;
      }
      if (reply.status === 404) throw new ApiError(404, 'unknown run');
      if (!reply.ok || !reply.body) {
        onConnection?.(false);
        await sleep(300);
        continue;
      }
      onConnection?.(true);
      const parser = new SseParser();
      const reader = reply.body.getReader();
      const decoder = new TextDecoder();
      try {
        for (;;) {
          const { done, value } = await reader.read();
          const chunk = done ? parser.flush() : parser.push(decoder.decode(value, { stream: true }));
          for (const frame of chunk) {
            if (frame.data === '') continue;
            const event = JSON.parse(frame.data) as BusEvent;
            cursor = event.seq + 1;
            onEvent(event);
            const etype = (event.payload as { type?: string }).type;
            if (etype === 'signed-off' || etype === 'run-aborted') terminal = true;
          }
          if (done) break;
        }
      } catch (err) {
        if (signal?.aborted) break;
        // connection dropped mid-stream; resume from the cursor
        onConnection?.(false);
      } finally {
        reader.releaseLock();
      }
    }
    return cursor - 1;
  }
}

export interface SseFrame {
  id: string;
  event: string;
  data: string;
}

/**
 * Incremental server-sent-events parser. Frames are blank-line separated;
 * `:` lines are keep-alive comments; multiple data: lines join with \n.
 */
export class SseParser {
  private buffer = '';

  push(chunk: string): SseFrame[] {
    this.buffer += chunk;
    const frames: SseFrame[] = [];
    for (;;) {
      const cut = this.buffer.indexOf('\n\n');
      if (cut < 0) break;
      const block = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      const frame = parseBlock(block);
      if (frame) frames.push(frame);
    }
    return frames;
  }

  flush(): SseFrame[] {
    const rest = this.buffer;
    this.buffer = '';
    const frame = parseBlock(rest);
    return frame ? [frame] : [];
  }
}

function parseBlock(block: string): SseFrame | null {
  const frame: SseFrame = { id: '', event: '', data: '' };
  let sawField = false;
  for (const line of block.split('\n')) {
    if (!line || line.startsWith(':')) continue;
    const colon = line.indexOf(':');
    const field = colon < 0 ? line : line.slice(0, colon);
    let value = colon < 0 ? '' : line.slice(colon + 1);
    if (value.startsWith(' ')) value = value.slice(1);
    if (field === 'id') frame.id = value;
    else if (field === 'event') frame.event = value;
    else if (field === 'data') frame.data = frame.data ? frame.data + '\n' + value : value;
    else continue;
    sawField = true;
  }
  return sawField ? frame : null;
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
