export function formatTime(tsUs: number): string {
  const date = new Date(tsUs / 1000);
  return date.toISOString().replace('T', ' ').replace(/\.\d+Z$/, '');
}

export function formatAgo(tsUs: number, nowMs = Date.now()): string {
  const deltaS = Math.max(0, Math.round(nowMs / 1000 - tsUs / 1_000_000));
  if (deltaS < 60) return `${deltaS}s ago`;
  if (deltaS < 3600) return `${Math.floor(deltaS / 60)}m ago`;
  if (deltaS < 86400) return `${Math.floor(deltaS / 3600)}h ago`;
  return `${Math.floor(deltaS / 86400)}d ago`;
}

export function formatKbps(value: number): string {
  return value >= 100 ? value.toFixed(0) : value.toFixed(1);
}
