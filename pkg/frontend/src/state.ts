// Application state: one store, push events applied as ordered
// reductions keyed by seq. The UI never mutates server state directly;
// block/unblock round-trips through the API and lands back here.

import type {
  BlockChange,
  Dashboard,
  DeviceOverview,
  DeviceSummary,
  DomainRow,
  Label,
  PushEvent,
  SortKey,
} from './types';

export type Page = 'dashboard' | 'device';

export interface ViewState {
  page: Page;
  deviceKey: string | null;
  sortKey: SortKey;
  labelFilter: Label | null;
  live: boolean;
}

export interface AppState {
  view: ViewState;
  dashboard: Dashboard | null;
  devices: DeviceSummary[];
  trackerRows: DomainRow[];
  nonTrackerRows: DomainRow[];
  overview: DeviceOverview | null;
  blocklistVersion: number;
  lastSeq: number;
  apiDown: boolean;
  deviceMissing: boolean;
  pending: Set<string>;
  toast: string | null;
  /** set when pushes arrived that require refetching aggregates */
  dirty: boolean;
  /** set when a resync marker demands a full state reload */
  needsResync: boolean;
}

export function initialState(): AppState {
  return {
    view: { page: 'dashboard', deviceKey: null, sortKey: 'last_contacted', labelFilter: null, live: false },
    dashboard: null,
    devices: [],
    trackerRows: [],
    nonTrackerRows: [],
    overview: null,
    blocklistVersion: -1,
    lastSeq: -1,
    apiDown: false,
    deviceMissing: false,
    pending: new Set(),
    toast: null,
    dirty: false,
    needsResync: false,
  };
}

function applyBlockChanges(rows: DomainRow[], changes: BlockChange[], deviceKey: string | null): boolean {
  let touched = false;
  for (const change of changes) {
    if (deviceKey !== null && change.device_key !== deviceKey) continue;
    for (const row of rows) {
      if (row.fqdn === change.fqdn && row.blocked !== change.blocked) {
        row.blocked = change.blocked;
        touched = true;
      }
    }
  }
  return touched;
}

/**
 * Reduce one push event into the state. Events must be applied in seq
 * order per connection; stale or duplicate seqs are ignored. Returns
 * true when something visible changed.
 */
export function applyPush(state: AppState, event: PushEvent): boolean {
  if (event.kind === 'resync') {
    // resync carries the authoritative blocklist version; if it does not
    // match what the UI believes, a full reload recovers any missed
    // block_changed transitions
    state.lastSeq = event.seq;
    const version = event.payload['blocklist_version'] as number;
    if (version !== state.blocklistVersion) {
      state.blocklistVersion = version;
      state.needsResync = true;
    }
    return state.needsResync;
  }
  if (event.seq <= state.lastSeq) return false;
  state.lastSeq = event.seq;

  switch (event.kind) {
    case 'block_changed': {
      state.blocklistVersion = event.payload['version'] as number;
      const changes = (event.payload['changes'] as BlockChange[] | undefined) ?? [];
      let touched = applyBlockChanges(state.trackerRows, changes, state.view.deviceKey);
      touched = applyBlockChanges(state.nonTrackerRows, changes, state.view.deviceKey) || touched;
      state.dirty = true; // blocked-ratio pie and device cards shift
      return touched || changes.length > 0;
    }
    case 'domain_contacted':
    case 'traffic_sample':
    case 'device_seen':
      state.dirty = true;
      return false;
    default:
      return false;
  }
}

export const STATUS_BLOCKED = 'blocked';
export const STATUS_TRACKER = 'tracker-unblocked';
export const STATUS_NON_TRACKER = 'non-tracker';

export function rowStatus(row: DomainRow): string {
  if (row.blocked) return STATUS_BLOCKED;
  return row.label === 'tracker' ? STATUS_TRACKER : STATUS_NON_TRACKER;
}
