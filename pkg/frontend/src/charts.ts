// Chart rendering: pure functions from data to SVG markup. Values are
// mirrored into data-* attributes so tests can assert on exact numbers
// rather than pixel geometry.

import type { Alluvial } from './types';
import { formatKbps } from './format';

function esc(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;').replace(/"/g, '&quot;');
}

export function lineChart(
  points: [number, number][],
  opts: { width?: number; height?: number; unit?: string } = {},
): string {
  const width = opts.width ?? 560;
  const height = opts.height ?? 140;
  const pad = 28;
  if (!points.length) {
    return `<svg class="chart line-chart" viewBox="0 0 ${width} ${height}" data-points="0"><text x="${width / 2}" y="${height / 2}" class="empty">no data</text></svg>`;
  }
  const xs = points.map((p) => p[0]);
  const ys = points.map((p) => p[1]);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMax = Math.max(...ys, 1e-9);
  const plotW = width - pad * 2;
  const plotH = height - pad * 2;
  const px = (x: number) => pad + (xMax === xMin ? plotW / 2 : ((x - xMin) / (xMax - xMin)) * plotW);
  const py = (y: number) => pad + plotH - (y / yMax) * plotH;
  const path = points.map((p, i) => `${i ? 'L' : 'M'}${px(p[0]).toFixed(1)},${py(p[1]).toFixed(1)}`).join(' ');
  const peak = formatKbps(yMax);
  return (
    `<svg class="chart line-chart" viewBox="0 0 ${width} ${height}" data-points="${points.length}" data-peak="${yMax}">` +
    `<path class="series" d="${path}" fill="none"/>` +
    `<text x="2" y="${pad}" class="axis">${peak}${opts.unit ? ' ' + esc(opts.unit) : ''}</text>` +
    `<line class="axis" x1="${pad}" y1="${height - pad}" x2="${width - pad}" y2="${height - pad}"/>` +
    `</svg>`
  );
}

export function barChart(pairs: [string, number][], opts: { width?: number } = {}): string {
  const width = opts.width ?? 420;
  const rowH = 24;
  const labelW = 210;
  const height = Math.max(pairs.length, 1) * rowH + 8;
  if (!pairs.length) {
    return `<svg class="chart bar-chart" viewBox="0 0 ${width} ${height}" data-bars="0"><text x="8" y="${rowH}" class="empty">no data</text></svg>`;
  }
  const max = Math.max(...pairs.map((p) => p[1]), 1);
  const bars = pairs
    .map(([name, value], index) => {
      const y = index * rowH + 4;
      const barW = ((width - labelW - 60) * value) / max;
      return (
        `<g class="bar" data-name="${esc(name)}" data-value="${value}">` +
        `<text x="${labelW - 6}" y="${y + 14}" text-anchor="end" class="bar-label">${esc(name)}</text>` +
        `<rect x="${labelW}" y="${y}" width="${Math.max(barW, 1).toFixed(1)}" height="${rowH - 8}"/>` +
        `<text x="${labelW + Math.max(barW, 1) + 6}" y="${y + 14}" class="bar-value">${value}</text>` +
        `</g>`
      );
    })
    .join('');
  return `<svg class="chart bar-chart" viewBox="0 0 ${width} ${height}" data-bars="${pairs.length}">${bars}</svg>`;
}

const PIE_CLASSES = ['s0', 's1', 's2', 's3', 's4', 's5', 's6', 's7'];

export function pieChart(slices: [string, number][], opts: { size?: number } = {}): string {
  const size = opts.size ?? 150;
  const total = slices.reduce((sum, s) => sum + s[1], 0);
  const radius = size / 2 - 4;
  const cx = size / 2;
  const cy = size / 2;
  if (total <= 0) {
    return `<svg class="chart pie-chart" viewBox="0 0 ${size} ${size}" data-total="0"><circle cx="${cx}" cy="${cy}" r="${radius}" class="empty-ring"/></svg>`;
  }
  let angle = -Math.PI / 2;
  const parts: string[] = [];
  slices.forEach(([name, value], index) => {
    if (value <= 0) return;
    const sweep = (value / total) * Math.PI * 2;
    const x1 = cx + radius * Math.cos(angle);
    const y1 = cy + radius * Math.sin(angle);
    angle += sweep;
    const x2 = cx + radius * Math.cos(angle);
    const y2 = cy + radius * Math.sin(angle);
    const large = sweep > Math.PI ? 1 : 0;
    const cls = PIE_CLASSES[index % PIE_CLASSES.length];
    if (Math.abs(sweep - Math.PI * 2) < 1e-9) {
      parts.push(
        `<circle class="slice ${cls}" data-name="${esc(name)}" data-value="${value}" cx="${cx}" cy="${cy}" r="${radius}"><title>${esc(name)}: ${value}</title></circle>`,
      );
    } else {
      parts.push(
        `<path class="slice ${cls}" data-name="${esc(name)}" data-value="${value}" d="M${cx},${cy} L${x1.toFixed(2)},${y1.toFixed(2)} A${radius},${radius} 0 ${large} 1 ${x2.toFixed(2)},${y2.toFixed(2)} Z"><title>${esc(name)}: ${value}</title></path>`,
      );
    }
  });
  return `<svg class="chart pie-chart" viewBox="0 0 ${size} ${size}" data-total="${total}">${parts.join('')}</svg>`;
}

const LAYERS = ['device', 'sld', 'organization', 'label'] as const;

/**
 * Layered flow diagram: four node columns, edges as ribbons whose
 * thickness is proportional to contact counts. Each node carries a
 * <title> with its total so conservation is inspectable.
 */
export function alluvialChart(graph: Alluvial, opts: { width?: number; height?: number } = {}): string {
  const width = opts.width ?? 860;
  const height = opts.height ?? Math.max(220, graph.nodes.length * 14);
  if (!graph.edges.length) {
    return `<svg class="chart alluvial" viewBox="0 0 ${width} ${height}" data-total="0"><text x="${width / 2}" y="${height / 2}" class="empty">no data</text></svg>`;
  }
  const colX = LAYERS.map((_, i) => 60 + (i * (width - 180)) / (LAYERS.length - 1));
  // node totals: max of in/out flow keeps middle layers conserved
  const totals = new Map<string, number>();
  const key = (ref: { layer: string; name: string }) => `${ref.layer}:${ref.name}`;
  for (const edge of graph.edges) {
    totals.set(key(edge.source), (totals.get(key(edge.source)) ?? 0) + edge.weight);
  }
  const inflow = new Map<string, number>();
  for (const edge of graph.edges) {
    inflow.set(key(edge.target), (inflow.get(key(edge.target)) ?? 0) + edge.weight);
  }
  for (const [k, v] of inflow) {
    totals.set(k, Math.max(totals.get(k) ?? 0, v));
  }

  const layerTotal = graph.edges
    .filter((e) => e.source.layer === 'device')
    .reduce((sum, e) => sum + e.weight, 0);
  const scale = (height - 40) / Math.max(layerTotal, 1);
  const gap = 6;

  interface Placed {
    y0: number;
    h: number;
    outCursor: number;
    inCursor: number;
    x: number;
    name: string;
    layer: string;
  }
  const placed = new Map<string, Placed>();
  LAYERS.forEach((layer, layerIndex) => {
    const names = graph.nodes.filter((n) => n.layer === layer).map((n) => n.name).sort();
    let y = 20;
    for (const name of names) {
      const total = totals.get(`${layer}:${name}`) ?? 0;
      const h = Math.max(total * scale, 2);
      placed.set(`${layer}:${name}`, {
        y0: y,
        h,
        outCursor: y,
        inCursor: y,
        x: colX[layerIndex],
        name,
        layer,
      });
      y += h + gap;
    }
  });

  const ribbons = graph.edges
    .map((edge) => {
      const source = placed.get(key(edge.source))!;
      const target = placed.get(key(edge.target))!;
      const h = Math.max(edge.weight * scale, 1);
      const y1 = source.outCursor;
      source.outCursor += h;
      const y2 = target.inCursor;
      target.inCursor += h;
      const x1 = source.x + 10;
      const x2 = target.x;
      const mid = (x1 + x2) / 2;
      const label = edge.target.layer === 'label' ? ` ${edge.target.name === 'tracker' ? 'to-tracker' : 'to-non-tracker'}` : '';
      return (
        `<path class="ribbon${label}" data-weight="${edge.weight}" data-source="${esc(key(edge.source))}" data-target="${esc(key(edge.target))}" ` +
        `d="M${x1},${y1 + h / 2} C${mid},${y1 + h / 2} ${mid},${y2 + h / 2} ${x2},${y2 + h / 2}" stroke-width="${h.toFixed(1)}" fill="none">` +
        `<title>${esc(edge.source.name)} → ${esc(edge.target.name)}: ${edge.weight}</title></path>`
      );
    })
    .join('');

  const nodes = [...placed.values()]
    .map((node) => {
      const total = totals.get(`${node.layer}:${node.name}`) ?? 0;
      const anchor = node.layer === 'label' ? 'end' : 'start';
      const tx = node.layer === 'label' ? node.x - 4 : node.x + 14;
      return (
        `<g class="node" data-layer="${esc(node.layer)}" data-name="${esc(node.name)}" data-total="${total}">` +
        `<rect x="${node.x}" y="${node.y0}" width="10" height="${node.h.toFixed(1)}"/>` +
        `<title>${esc(node.name)}: ${total}</title>` +
        `<text x="${tx}" y="${node.y0 + node.h / 2 + 4}" text-anchor="${anchor}">${esc(node.name)}</text>` +
        `</g>`
      );
    })
    .join('');

  const headers = LAYERS.map(
    (layer, i) => `<text class="layer-header" x="${colX[i]}" y="12">${layer}</text>`,
  ).join('');
  return `<svg class="chart alluvial" viewBox="0 0 ${width} ${height}" data-total="${layerTotal}">${headers}${ribbons}${nodes}</svg>`;
}
