// DOM rendering for the two pages. Pure string templates; the app
// attaches one delegated listener, so re-renders stay cheap and safe.

import { alluvialChart, barChart, lineChart, pieChart } from './charts';
import { formatAgo, formatTime } from './format';
import type { AppState } from './state';
import { rowStatus, STATUS_BLOCKED, STATUS_NON_TRACKER, STATUS_TRACKER } from './state';
import type { DomainRow, SortKey } from './types';

function esc(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;').replace(/"/g, '&quot;');
}

// status symbols follow the house convention: green check for
// non-trackers, red warning triangle for unblocked trackers, red
// circle-slash once blocked
const STATUS_ICON: Record<string, string> = {
  [STATUS_NON_TRACKER]: '&#10003;',
  [STATUS_TRACKER]: '&#9888;',
  [STATUS_BLOCKED]: '&#8856;',
};

export function statusIcon(status: string): string {
  return STATUS_ICON[status] ?? '?';
}

function banner(state: AppState): string {
  if (!state.apiDown) return '';
  return `<div class="banner error">API unreachable. <button class="retry" data-action="retry">Retry</button></div>`;
}

function toast(state: AppState): string {
  return state.toast ? `<div class="toast">${esc(state.toast)}</div>` : '';
}

function header(state: AppState): string {
  const dot = state.view.live ? 'live' : 'offline';
  return (
    `<header>` +
    `<h1 data-action="nav-dashboard">gatewatch</h1>` +
    `<nav><a href="#/" data-action="nav-dashboard" class="${state.view.page === 'dashboard' ? 'active' : ''}">Dashboard</a></nav>` +
    `<span class="live-dot ${dot}" data-live="${state.view.live}">${dot}</span>` +
    `</header>`
  );
}

function deviceCards(state: AppState): string {
  if (!state.devices.length) return `<p class="empty">No devices observed yet.</p>`;
  return state.devices
    .map((device) => {
      const recent = device.recent
        .map(
          (row) =>
            `<li><span class="status ${rowStatus(row)}">${statusIcon(rowStatus(row))}</span> ${esc(row.fqdn)} <span class="ago">${formatAgo(row.last_contacted_us)}</span></li>`,
        )
        .join('');
      return (
        `<article class="device-card" data-action="open-device" data-device="${esc(device.device_key)}">` +
        `<h3>${esc(device.display_name)}</h3>` +
        `<p class="counts"><span class="count-trackers">${device.tracker_domains}</span> trackers · ` +
        `<span class="count-non-trackers">${device.non_tracker_domains}</span> non-trackers · ` +
        `<span class="count-blocked">${device.blocked_domains}</span> blocked</p>` +
        `<ul class="recent">${recent}</ul>` +
        `</article>`
      );
    })
    .join('');
}

export function renderDashboard(state: AppState): string {
  const dashboard = state.dashboard;
  const body = dashboard
    ? `<div class="grid">` +
      `<section class="panel wide" id="outgoing"><h2>Outgoing traffic (kbps)</h2>${lineChart(dashboard.outgoing_series, { unit: 'kbps' })}</section>` +
      `<section class="panel" id="top-trackers"><h2>Top tracker domains</h2>${barChart(dashboard.top_trackers)}</section>` +
      `<section class="panel" id="top-non-trackers"><h2>Top non-tracker domains</h2>${barChart(dashboard.top_non_trackers)}</section>` +
      `<section class="panel" id="device-pie"><h2>Contacts per device</h2>${pieChart(dashboard.per_device_pie)}</section>` +
      `<section class="panel wide" id="alluvial"><h2>Device → SLD → Organization → Classification</h2>${alluvialChart(dashboard.alluvial)}</section>` +
      `<section class="panel wide" id="devices"><h2>Devices</h2><div class="cards">${deviceCards(state)}</div></section>` +
      `</div>`
    : `<p class="empty">Loading…</p>`;
  return `${header(state)}${banner(state)}<main id="dashboard-page">${body}</main>${toast(state)}`;
}

const SORTS: [SortKey, string][] = [
  ['last_contacted', 'Last contacted'],
  ['access_count', 'Access count'],
  ['fqdn', 'Domain'],
  ['blocked', 'Blocked'],
];

function sortControls(state: AppState): string {
  const buttons = SORTS.map(
    ([key, label]) =>
      `<button class="sort ${state.view.sortKey === key ? 'active' : ''}" data-action="sort" data-sort="${key}">${label}</button>`,
  ).join('');
  return `<div class="sorts">Sort by: ${buttons}</div>`;
}

function domainTable(rows: DomainRow[], kind: string): string {
  if (!rows.length) {
    return `<table class="domains ${kind}" data-rows="0"><tbody><tr><td class="empty">none</td></tr></tbody></table>`;
  }
  const body = rows
    .map((row) => {
      const status = rowStatus(row);
      return (
        `<tr data-fqdn="${esc(row.fqdn)}" data-status="${status}" data-blocked="${row.blocked}" class="${row.blocked ? 'row-blocked' : ''}">` +
        `<td class="fqdn">${esc(row.fqdn)}</td>` +
        `<td class="count">${row.access_count}</td>` +
        `<td class="last" title="${formatTime(row.last_contacted_us)}">${formatAgo(row.last_contacted_us)}</td>` +
        `<td class="status-cell"><button class="toggle" data-action="toggle" data-fqdn="${esc(row.fqdn)}" title="${row.blocked ? 'unblock' : 'block'}">` +
        `<span class="status ${status}">${statusIcon(status)}</span></button></td>` +
        `</tr>`
      );
    })
    .join('');
  return (
    `<table class="domains ${kind}" data-rows="${rows.length}">` +
    `<thead><tr><th>Domain</th><th>Access count</th><th>Last contacted</th><th>Status</th></tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}

export function renderDevice(state: AppState): string {
  if (state.deviceMissing) {
    return `${header(state)}${banner(state)}<main id="device-page"><p class="empty not-found">Unknown device.</p><a href="#/" data-action="nav-dashboard">Back to dashboard</a></main>`;
  }
  const overview = state.overview;
  if (!overview) {
    return `${header(state)}${banner(state)}<main id="device-page"><p class="empty">Loading…</p></main>${toast(state)}`;
  }
  const ratio: [string, number][] = [
    ['unblocked trackers', overview.blocked_ratio.unblocked_trackers],
    ['blocked trackers', overview.blocked_ratio.blocked_trackers],
    ['non-trackers', overview.blocked_ratio.non_trackers],
  ];
  const body =
    `<h2 class="device-title">${esc(overview.device.display_name)} <code>${esc(overview.device.device_key)}</code></h2>` +
    `<div class="grid">` +
    `<section class="panel" id="ratio-pie"><h2>Trackers blocked / unblocked</h2>${pieChart(ratio)}</section>` +
    `<section class="panel wide" id="dns-series"><h2>DNS queries over time</h2>${lineChart(overview.dns_timeseries, { unit: 'queries' })}</section>` +
    `<section class="panel wide" id="device-alluvial"><h2>SLD → Organization → Classification</h2>${alluvialChart(overview.alluvial)}</section>` +
    `<section class="panel wide" id="tables">${sortControls(state)}` +
    `<h2>Trackers</h2>${domainTable(state.trackerRows, 'trackers')}` +
    `<h2>Non-trackers</h2>${domainTable(state.nonTrackerRows, 'non-trackers')}` +
    `</section>` +
    `</div>`;
  return `${header(state)}${banner(state)}<main id="device-page">${body}</main>${toast(state)}`;
}

export function render(state: AppState): string {
  return state.view.page === 'device' ? renderDevice(state) : renderDashboard(state);
}
