// Shapes served by the gateway HTTP API (see the shipped JSON schema).

export type Label = 'tracker' | 'non_tracker';

export interface DomainRow {
  fqdn: string;
  sld: string | null;
  organization: string;
  label: Label;
  access_count: number;
  last_contacted_us: number;
  blocked: boolean;
}

export interface DeviceSummary {
  device_key: string;
  display_name: string;
  first_seen_us: number;
  last_seen_us: number;
  addresses: string[];
  tracker_domains: number;
  non_tracker_domains: number;
  blocked_domains: number;
  recent: DomainRow[];
}

export interface AlluvialNodeRef {
  layer: 'device' | 'sld' | 'organization' | 'label';
  name: string;
}

export interface AlluvialEdge {
  source: AlluvialNodeRef;
  target: AlluvialNodeRef;
  weight: number;
}

export interface Alluvial {
  nodes: AlluvialNodeRef[];
  edges: AlluvialEdge[];
}

export interface Dashboard {
  outgoing_series: [number, number][];
  top_trackers: [string, number][];
  top_non_trackers: [string, number][];
  per_device_pie: [string, number][];
  alluvial: Alluvial;
}

export interface BlockedRatio {
  unblocked_trackers: number;
  blocked_trackers: number;
  non_trackers: number;
}

export interface DeviceOverview {
  device: DeviceSummary;
  blocked_ratio: BlockedRatio;
  dns_timeseries: [number, number][];
  alluvial: Alluvial;
}

export interface StatusInfo {
  blocklist_version: number;
  blocked_domains: string[];
  packets: number;
  events: number;
  drops: Record<string, number>;
}

export type PushKind =
  | 'resync'
  | 'domain_contacted'
  | 'traffic_sample'
  | 'block_changed'
  | 'device_seen';

export interface PushEvent {
  kind: PushKind;
  seq: number;
  payload: Record<string, unknown>;
}

export interface BlockChange {
  device_key: string;
  fqdn: string;
  blocked: boolean;
}

export type SortKey = 'last_contacted' | 'access_count' | 'fqdn' | 'blocked';
