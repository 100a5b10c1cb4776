// Full console session against a live local gateway: the scripted crc run
// blocks, shows up in the inbox, gets reviewed through the editor, and the
// gauge walks to the scenario's final value. A raced duplicate resolution
// must surface as a conflict notice, not as a silent success.

import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { spawn, type ChildProcess } from 'node:child_process';
import { readFileSync } from 'node:fs';
import { createServer } from 'node:net';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { Window } from 'happy-dom';

import { GatewayClient } from '../src/api.js';
import { ConsoleApp } from '../src/main.js';

const repoRoot = join(dirname(fileURLToPath(import.meta.url)), '..', '..');
const scenario = JSON.parse(readFileSync(join(repoRoot, 'scenarios', 'crc.json'), 'utf8'));
const T1_WIRE = scenario.resolutions[0].resolution as Record<string, any>; // patch-rtl
const T2_WIRE = scenario.resolutions[1].resolution as Record<string, any>; // remove-properties

const RUN_MAIN = 'console-e2e';
const RUN_RACE = 'console-e2e-race';

let proc: ChildProcess;
let base = '';
let direct: GatewayClient;
const stderrLines: string[] = [];

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, '127.0.0.1', () => {
      const addr = srv.address();
      if (addr && typeof addr === 'object') srv.close(() => resolve(addr.port));
      else reject(new Error('could not allocate a port'));
    });
  });
}

async function until<T>(
  probe: () => T | null | undefined | false,
  what: string,
  timeoutMs = 20_000,
  stepMs = 25,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const value = probe();
    if (value) return value;
    if (Date.now() > deadline) {
      throw new Error(`timed out waiting for ${what}\nserver stderr tail:\n${stderrLines.slice(-12).join('')}`);
    }
    await new Promise((r) => setTimeout(r, stepMs));
  }
}

async function untilAsync(probe: () => Promise<boolean>, what: string, timeoutMs = 20_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    if (await probe()) return;
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 50));
  }
}

interface Page {
  win: Window;
  root: HTMLElement;
  app: ConsoleApp;
}

const pages: Page[] = [];

function openPage(hash: string): Page {
  const win = new Window({ url: 'http://localhost/' });
  win.localStorage.setItem('tapeloop-console-base', base);
  const root = win.document.createElement('div') as unknown as HTMLElement;
  win.document.body.appendChild(root as any);
  win.location.hash = hash;
  const app = new ConsoleApp(win as unknown as globalThis.Window, root);
  app.start();
  const page = { win, root, app };
  pages.push(page);
  return page;
}

function field<T extends { value: string }>(root: HTMLElement, selector: string): T {
  const el = root.querySelector(selector) as T | null;
  if (!el) throw new Error(`no field ${selector}`);
  return el;
}

function setValue(page: Page, selector: string, value: string, event = 'input'): void {
  const el = field(page.root, selector);
  el.value = value;
  (el as unknown as Element).dispatchEvent(
    new page.win.Event(event, { bubbles: true, cancelable: true }) as unknown as Event,
  );
}

function fire(page: Page, selector: string, event: string): void {
  const el = page.root.querySelector(selector);
  if (!el) throw new Error(`no element ${selector}`);
  el.dispatchEvent(new page.win.Event(event, { bubbles: true, cancelable: true }) as unknown as Event);
}

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  direct = new GatewayClient(base);
  proc = spawn(
    'python3',
    ['-m', 'tapeloop.cli', 'serve', '--host', '127.0.0.1', '--port', String(port), '--scenario-dir', 'scenarios'],
    { cwd: repoRoot, stdio: ['ignore', 'ignore', 'pipe'] },
  );
  proc.stderr!.on('data', (chunk: Buffer) => stderrLines.push(chunk.toString()));
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const health = await direct.health();
      if (health.ok) break;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      throw new Error(`gateway never came up\n${stderrLines.join('')}`);
    }
    await new Promise((r) => setTimeout(r, 100));
  }
});

afterAll(async () => {
  for (const page of pages) {
    page.app.stop();
    try {
      page.win.close();
    } catch {
      // already closed
    }
  }
  proc?.kill('SIGTERM');
  await new Promise((r) => setTimeout(r, 200));
  if (proc && proc.exitCode === null) proc.kill('SIGKILL');
});

describe('console against a live gateway', () => {
  it('surfaces the blocked run in the inbox within two seconds', async () => {
    const page = openPage('#/inbox');
    await until(() => page.root.querySelector('.inbox-list .empty-state'), 'the empty inbox');

    await direct.createRun({ scenario: 'crc', temperature: 0.2, run_id: RUN_MAIN });
    const started = Date.now();
    const card = await until(
      () => page.root.querySelector(`.inbox-card[data-run="${RUN_MAIN}"]`),
      'the inbox card',
      5_000,
    );
    expect(Date.now() - started).toBeLessThanOrEqual(2_000);
    expect(card.getAttribute('data-ticket')).toBe('T1');
    expect(card.textContent).toContain('deliberation-exhausted');
    expect(card.getAttribute('href')).toBe(`#/runs/${RUN_MAIN}`);
    page.app.stop();
  });

  it('walks the review to sign-off and the gauge to the final value', async () => {
    const page = openPage(`#/runs/${RUN_MAIN}`);

    // T1 blocks the run; the badge names it and the editor is preset to a patch
    await until(
      () => page.root.querySelector('.ticket[data-ticket="T1"] form.editor'),
      'the T1 editor',
    );
    expect(page.root.querySelector('.badge.status-blocked-hitl')).not.toBeNull();
    expect(page.root.querySelector('.ticket-link')?.getAttribute('href')).toBe('#ticket-T1');
    expect(field(page.root, '.f-kind').value).toBe('patch-rtl');

    setValue(page, '.f-reviewer', T1_WIRE.reviewer);
    setValue(page, '.f-minutes', String(T1_WIRE.effort_minutes));
    setValue(page, '.f-module', T1_WIRE.module_name, 'change');
    const baseBox = page.root.querySelector('.diff-base')!;
    expect(baseBox.getAttribute('data-revision')).toBe('1');
    expect(baseBox.textContent).toContain('module crc_engine');
    setValue(page, '.f-diff', T1_WIRE.diff);
    expect((page.root.querySelector('.submit') as any).disabled).toBe(false);
    fire(page, 'form.editor', 'submit');

    // the run resumes, stalls on coverage, and escalates T2
    const t2 = await until(
      () => page.root.querySelector('.ticket[data-ticket="T2"] form.editor'),
      'the T2 editor',
      30_000,
    );
    expect(t2).not.toBeNull();
    expect(field(page.root, '.ticket[data-ticket="T2"] .f-kind').value).toBe('remove-properties');
    expect(page.root.querySelector('.gauge')?.getAttribute('data-pct')).toBe('73.08');

    setValue(page, '.ticket[data-ticket="T2"] .f-reviewer', T2_WIRE.reviewer);
    setValue(page, '.ticket[data-ticket="T2"] .f-minutes', String(T2_WIRE.effort_minutes));
    setValue(page, '.ticket[data-ticket="T2"] .f-property-ids', T2_WIRE.property_ids.join('\n'));
    expect((page.root.querySelector('.ticket[data-ticket="T2"] .submit') as any).disabled).toBe(false);
    fire(page, '.ticket[data-ticket="T2"] form.editor', 'submit');

    // scripted finish: signed off, gauge at the scenario's final value
    await until(() => page.root.querySelector('.badge.status-signed-off'), 'sign-off', 30_000);
    expect(page.root.querySelector('.gauge')?.getAttribute('data-pct')).toBe('100');
    await until(() => page.root.querySelector('.stream-end'), 'the stream-end marker');
    expect(page.root.querySelector('.ticket')).toBeNull();

    // the transcript kept every event in exact sequence order
    const seqs = [...page.root.querySelectorAll('.transcript .row')].map((r) =>
      Number(r.getAttribute('data-seq')),
    );
    expect(seqs.length).toBeGreaterThan(100);
    expect(seqs).toEqual(seqs.map((_, i) => i + 1));
    page.app.stop();
  });

  it('renders a conflict notice when a duplicate resolution loses the race', async () => {
    await direct.createRun({ scenario: 'crc', temperature: 0.2, run_id: RUN_RACE });
    const page = openPage(`#/runs/${RUN_RACE}`);
    await until(
      () => page.root.querySelector('.ticket[data-ticket="T1"] form.editor'),
      'the raced T1 editor',
    );

    // a complete draft, ready to submit
    setValue(page, '.f-reviewer', T1_WIRE.reviewer);
    setValue(page, '.f-minutes', String(T1_WIRE.effort_minutes));
    setValue(page, '.f-module', T1_WIRE.module_name, 'change');
    setValue(page, '.f-diff', T1_WIRE.diff);
    expect((page.root.querySelector('.submit') as any).disabled).toBe(false);

    // freeze this console's stream, then let another reviewer win the race
    page.app.stop();
    await direct.submitResolution(RUN_RACE, 'T1', T1_WIRE);

    fire(page, 'form.editor', 'submit');
    const notice = await until(
      () => page.root.querySelector('.submit-error.conflict-notice'),
      'the conflict notice',
    );
    expect(notice.textContent).toContain('conflict:');
    expect(notice.textContent!.length).toBeGreaterThan(12);
    // the losing submit must not pretend it was applied
    expect((page.root.querySelector('.submit') as any).disabled).toBe(true);

    // leave the server tidy: answer T2 directly and let the run finish
    await untilAsync(
      () => direct.getRun(RUN_RACE).then((s) => (s.open_tickets ?? []).includes('T2')).catch(() => false),
      'T2 to open on the raced run',
    );
    await direct.submitResolution(RUN_RACE, 'T2', T2_WIRE);
    await untilAsync(
      () => direct.getRun(RUN_RACE).then((s) => s.status === 'signed-off').catch(() => false),
      'the raced run to finish',
    );
  });
});
