// Connection handling: snapshot first, then the event stream, with
// reconnect-and-resume. All requests go through a Transport so tests can
// observe exactly which URLs the UI would touch (they must all be local).

import { ViewModel } from "./viewmodel.js";
import type { StateSnapshot } from "./types.js";

export interface SocketHandlers {
  onOpen(): void;
  onMessage(text: string): void;
  onClose(): void;
}

export interface SocketHandle {
  close(): void;
}

export interface Transport {
  fetchJson(path: string): Promise<unknown>;
  postJson(path: string, body: unknown): Promise<unknown>;
  openSocket(path: string, handlers: SocketHandlers): SocketHandle;
}

/** Same-origin transport: every path is relative, so the browser can
 *  never be sent to a non-local origin. */
export class BrowserTransport implements Transport {
  async fetchJson(path: string): Promise<unknown> {
    const response = await fetch(path);
    if (!response.ok) {
      throw new Error(`${path}: HTTP ${response.status}`);
    }
    return response.json();
  }

  async postJson(path: string, body: unknown): Promise<unknown> {
    const response = await fetch(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new Error(`${path}: HTTP ${response.status}`);
    }
    return response.json();
  }

  openSocket(path: string, handlers: SocketHandlers): SocketHandle {
    const scheme = location.protocol === "https:" ? "wss:" : "ws:";
    const socket = new WebSocket(`${scheme}//${location.host}${path}`);
    socket.onopen = () => handlers.onOpen();
    socket.onmessage = (event) => handlers.onMessage(String(event.data));
    socket.onclose = () => handlers.onClose();
    socket.onerror = () => socket.close();
    return { close: () => socket.close() };
  }
}

const BACKOFF_MS = [500, 1000, 2000, 5000, 10000];

export interface ConnectionOptions {
  onChange?: () => void;
  onStale?: (stale: boolean) => void;
  scheduleRetry?: (fn: () => void, delayMs: number) => void;
}

/** Snapshot-then-stream with automatic reconnect.
 *
 *  On every (re)connect the snapshot is fetched first and applied, then
 *  the event socket resumes; the view model drops events at or below the
 *  snapshot's seq, so a reconnect never duplicates markers or fixes. */
export class Connection {
  stale = true;
  private attempts = 0;
  private handle: SocketHandle | null = null;
  private stopped = false;

  constructor(
    private transport: Transport,
    private vm: ViewModel,
    private options: ConnectionOptions = {},
  ) {}

  async start(): Promise<void> {
    this.stopped = false;
    await this.connectOnce();
  }

  stop(): void {
    this.stopped = true;
    this.handle?.close();
  }

  private setStale(stale: boolean): void {
    if (stale !== this.stale) {
      this.stale = stale;
      this.options.onStale?.(stale);
    }
  }

  private async connectOnce(): Promise<void> {
    if (this.stopped) {
      return;
    }
    try {
      const snapshot = (await this.transport.fetchJson("/state")) as StateSnapshot;
      this.vm.applySnapshot(snapshot);
      this.options.onChange?.();
    } catch {
      this.retryLater();
      return;
    }
    this.handle = this.transport.openSocket("/events", {
      onOpen: () => {
        this.attempts = 0;
        this.setStale(false);
      },
      onMessage: (text) => {
        if (this.vm.applyEventLine(text)) {
          this.options.onChange?.();
        }
      },
      onClose: () => {
        this.setStale(true);
        this.retryLater();
      },
    });
  }

  private retryLater(): void {
    if (this.stopped) {
      return;
    }
    const delay = BACKOFF_MS[Math.min(this.attempts, BACKOFF_MS.length - 1)];
    this.attempts += 1;
    const schedule =
      this.options.scheduleRetry ?? ((fn, ms) => setTimeout(fn, ms));
    schedule(() => void this.connectOnce(), delay);
  }
}

/** POST the target selection; the service answers with the new seq. */
export async function selectTarget(
  transport: Transport,
  callsign: string | null,
): Promise<void> {
  await transport.postJson("/target", { callsign });
}

/** Change the tail window, then re-query the target's tail so the view
 *  covers the wider window immediately. */
export async function setTailWindow(
  transport: Transport,
  vm: ViewModel,
  seconds: number,
): Promise<void> {
  await transport.postJson("/config/tail_window", { seconds });
  if (vm.target) {
    const body = (await transport.fetchJson(
      `/stations/${encodeURIComponent(vm.target)}/tail?window=${seconds}`,
    )) as { fixes: import("./types.js").FixDict[] };
    vm.replaceTail(vm.target, body.fixes);
  }
}
