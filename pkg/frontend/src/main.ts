// App wiring: data loading, push-event reduction, routing, and the
// delegated click handler. `createApp` is also the entry point for the
// integration tests, which drive a real server through this exact code.

import { ApiClient, ApiError, openEventStream, StreamHandle } from './api';
import { applyPush, initialState, type AppState } from './state';
import { render } from './views';
import type { Label, PushEvent, SortKey } from './types';

export interface AppOptions {
  pollIntervalMs?: number;
  refreshDebounceMs?: number;
}

export class App {
  state: AppState = initialState();
  api: ApiClient;
  private stream: StreamHandle | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private refreshTimer: ReturnType<typeof setTimeout> | null = null;
  private toastTimer: ReturnType<typeof setTimeout> | null = null;
  private options: Required<AppOptions>;

  constructor(public root: HTMLElement, base = '', options: AppOptions = {}) {
    this.api = new ApiClient(base);
    this.options = {
      pollIntervalMs: options.pollIntervalMs ?? 5000,
      refreshDebounceMs: options.refreshDebounceMs ?? 300,
    };
    this.root.addEventListener('click', (event) => this.onClick(event));
  }

  // -- lifecycle -------------------------------------------------------------

  async start(): Promise<void> {
    this.stream = openEventStream(
      this.api.base,
      (event) => this.onPush(event),
      (live) => this.onLive(live),
    );
    // poll as a fallback whenever the stream is not connected
    this.pollTimer = setInterval(() => {
      if (!this.state.view.live) void this.refresh();
    }, this.options.pollIntervalMs);
    await this.refresh();
  }

  stop(): void {
    this.stream?.close();
    if (this.pollTimer) clearInterval(this.pollTimer);
    if (this.refreshTimer) clearTimeout(this.refreshTimer);
    if (this.toastTimer) clearTimeout(this.toastTimer);
  }

  // -- data ------------------------------------------------------------------

  async refresh(): Promise<void> {
    try {
      if (this.state.view.page === 'device' && this.state.view.deviceKey) {
        const key = this.state.view.deviceKey;
        const [overview, trackers, nonTrackers, devices] = await Promise.all([
          this.api.overview(key),
          this.api.deviceDomains(key, 'tracker', this.state.view.sortKey),
          this.api.deviceDomains(key, 'non_tracker', this.state.view.sortKey),
          this.api.devices(),
        ]);
        this.state.overview = overview;
        this.state.trackerRows = this.filterRows(trackers);
        this.state.nonTrackerRows = this.filterRows(nonTrackers);
        this.state.devices = devices;
        this.state.deviceMissing = false;
      } else {
        const [dashboard, devices] = await Promise.all([this.api.dashboard(), this.api.devices()]);
        this.state.dashboard = dashboard;
        this.state.devices = devices;
      }
      this.state.apiDown = false;
    } catch (error) {
      if (error instanceof ApiError && error.code === 'unknown_device') {
        this.state.deviceMissing = true;
      } else {
        this.state.apiDown = true;
      }
    }
    this.state.dirty = false;
    this.render();
  }

  private filterRows(rows: typeof this.state.trackerRows) {
    const filter = this.state.view.labelFilter;
    return filter ? rows.filter((row) => row.label === filter) : rows;
  }

  private scheduleRefresh(): void {
    if (this.refreshTimer) return;
    this.refreshTimer = setTimeout(() => {
      this.refreshTimer = null;
      void this.refresh();
    }, this.options.refreshDebounceMs);
  }

  // -- push events -------------------------------------------------------------

  private onPush(event: PushEvent): void {
    const touched = applyPush(this.state, event);
    if (this.state.needsResync) {
      this.state.needsResync = false;
      void this.refresh();
      return;
    }
    if (touched) this.render();
    if (this.state.dirty) this.scheduleRefresh();
  }

  private onLive(live: boolean): void {
    if (this.state.view.live === live) return;
    this.state.view.live = live;
    this.render();
  }

  // -- actions -----------------------------------------------------------------

  async navigate(page: 'dashboard' | 'device', deviceKey?: string): Promise<void> {
    this.state.view.page = page;
    this.state.view.deviceKey = deviceKey ?? null;
    this.state.deviceMissing = false;
    this.state.overview = null;
    await this.refresh();
  }

  async setSort(sortKey: SortKey): Promise<void> {
    this.state.view.sortKey = sortKey;
    await this.refresh();
  }

  async setLabelFilter(filter: Label | null): Promise<void> {
    this.state.view.labelFilter = filter;
    await this.refresh();
  }

  /** Block or unblock a visible row; no optimistic state on failure. */
  async toggleBlock(fqdn: string): Promise<void> {
    const row = [...this.state.trackerRows, ...this.state.nonTrackerRows].find(
      (r) => r.fqdn === fqdn,
    );
    if (!row || this.state.pending.has(fqdn)) return;
    this.state.pending.add(fqdn);
    const wantBlocked = !row.blocked;
    try {
      if (wantBlocked) {
        await this.api.block(fqdn);
      } else {
        await this.api.unblock(fqdn);
      }
      // acknowledged: reflect it now; the push event that follows is a no-op
      for (const r of [...this.state.trackerRows, ...this.state.nonTrackerRows]) {
        if (r.fqdn === fqdn) r.blocked = wantBlocked;
      }
      this.state.dirty = true; // ratio pie and device cards moved
      this.scheduleRefresh();
    } catch {
      this.showToast(`Could not ${wantBlocked ? 'block' : 'unblock'} ${fqdn}`);
    } finally {
      this.state.pending.delete(fqdn);
      this.render();
    }
  }

  private showToast(message: string): void {
    this.state.toast = message;
    if (this.toastTimer) clearTimeout(this.toastTimer);
    this.toastTimer = setTimeout(() => {
      this.state.toast = null;
      this.render();
    }, 4000);
  }

  // -- dom ----------------------------------------------------------------------

  private onClick(event: Event): void {
    const target = (event.target as HTMLElement).closest<HTMLElement>('[data-action]');
    if (!target) return;
    const action = target.dataset['action'];
    if (action === 'nav-dashboard') {
      event.preventDefault();
      void this.navigate('dashboard');
    } else if (action === 'open-device') {
      void this.navigate('device', target.dataset['device']);
    } else if (action === 'toggle') {
      void this.toggleBlock(target.dataset['fqdn'] ?? '');
    } else if (action === 'sort') {
      void this.setSort((target.dataset['sort'] ?? 'last_contacted') as SortKey);
    } else if (action === 'retry') {
      void this.refresh();
    }
  }

  render(): void {
    this.root.innerHTML = render(this.state);
  }
}

export function createApp(root: HTMLElement, base = '', options: AppOptions = {}): App {
  return new App(root, base, options);
}

function routeFromHash(app: App): void {
  const match = /^#\/device\/(.+)$/.exec(location.hash);
  if (match) {
    void app.navigate('device', decodeURIComponent(match[1]));
  } else {
    void app.navigate('dashboard');
  }
}

export function bootstrap(): App {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app container');
  const app = createApp(root);
  window.addEventListener('hashchange', () => routeFromHash(app));
  // keep card clicks updating the hash so the back button works
  root.addEventListener('click', (event) => {
    const card = (event.target as HTMLElement).closest<HTMLElement>('[data-action="open-device"]');
    if (card) location.hash = `#/device/${encodeURIComponent(card.dataset['device'] ?? '')}`;
  });
  void app.start().then(() => routeFromHash(app));
  return app;
}
