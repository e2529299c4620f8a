/**
 * Loss-trajectory overlay chart, rendered to an SVG string.
 *
 * No chart library, no DOM dependency: the builder is a pure function
 * from series data to markup, which keeps it trivially testable and
 * lets the page inject it with innerHTML. Values are plotted exactly
 * as received; a null point (divergence) breaks the line.
 */

export interface Series {
  label: string;
  color: string;
  /** [step, loss] pairs; step 0 is the initial loss */
  points: Array<[number, number | null]>;
  dashed?: boolean;
}

export interface ChartOptions {
  width?: number;
  height?: number;
  title?: string;
}

const MARGIN = { top: 28, right: 16, bottom: 34, left: 56 };

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

const fmtTick = (v: number): string => {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.01) return v.toExponential(1);
  return String(Number(v.toPrecision(3)));
};

function ticks(lo: number, hi: number, count: number): number[] {
  if (!(hi > lo)) return [lo];
  const out = [];
  for (let i = 0; i <= count; i++) out.push(lo + ((hi - lo) * i) / count);
  return out;
}

export function renderChart(series: Series[], opts: ChartOptions = {}): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 320;
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;

  let xLo = Infinity;
  let xHi = -Infinity;
  let yLo = Infinity;
  let yHi = -Infinity;
  for (const s of series) {
    for (const [x, y] of s.points) {
      if (x < xLo) xLo = x;
      if (x > xHi) xHi = x;
      if (y !== null && Number.isFinite(y)) {
        if (y < yLo) yLo = y;
        if (y > yHi) yHi = y;
      }
    }
  }
  const open = `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" role="img">`;
  if (!Number.isFinite(xLo) || !Number.isFinite(yLo)) {
    return `${open}<text x="${width / 2}" y="${height / 2}" text-anchor="middle" ` +
      `class="chart-empty">no data</text></svg>`;
  }
  if (xHi === xLo) xHi = xLo + 1;
  if (yHi === yLo) {
    yHi += Math.abs(yHi) * 0.05 + 1e-9;
    yLo -= Math.abs(yLo) * 0.05 + 1e-9;
  } else {
    const pad = (yHi - yLo) * 0.06;
    yHi += pad;
    yLo -= pad;
  }

  const sx = (x: number): number => MARGIN.left + ((x - xLo) / (xHi - xLo)) * innerW;
  const sy = (y: number): number => MARGIN.top + (1 - (y - yLo) / (yHi - yLo)) * innerH;
  const r2 = (v: number): number => Math.round(v * 100) / 100;

  const parts: string[] = [open];
  if (opts.title) {
    parts.push(
      `<text x="${MARGIN.left}" y="18" class="chart-title">${esc(opts.title)}</text>`
    );
  }

  // frame and gridlines
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${innerW}" height="${innerH}" ` +
      `fill="none" stroke="#97a0ab" stroke-width="1"/>`
  );
  for (const tv of ticks(yLo, yHi, 4)) {
    const y = r2(sy(tv));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${MARGIN.left + innerW}" y2="${y}" ` +
        `stroke="#e3e6ea" stroke-width="1"/>`,
      `<text x="${MARGIN.left - 6}" y="${y + 4}" text-anchor="end" class="chart-tick">` +
        `${fmtTick(tv)}</text>`
    );
  }
  for (const tv of ticks(xLo, xHi, Math.min(8, Math.max(2, Math.round(xHi - xLo))))) {
    const x = r2(sx(tv));
    parts.push(
      `<text x="${x}" y="${height - 12}" text-anchor="middle" class="chart-tick">` +
        `${fmtTick(Math.round(tv))}</text>`
    );
  }
  parts.push(
    `<text x="${MARGIN.left + innerW / 2}" y="${height - 1}" text-anchor="middle" ` +
      `class="chart-axis">step</text>`
  );

  // one polyline per series, broken at nulls
  for (const s of series) {
    const segments: string[] = [];
    let d = "";
    for (const [x, y] of s.points) {
      if (y === null || !Number.isFinite(y)) {
        if (d) segments.push(d);
        d = "";
        continue;
      }
      d += `${d ? " L" : "M"} ${r2(sx(x))} ${r2(sy(y))}`;
    }
    if (d) segments.push(d);
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    for (const seg of segments) {
      parts.push(
        `<path d="${seg}" fill="none" stroke="${esc(s.color)}" stroke-width="1.8"${dash}/>`
      );
    }
  }

  // legend, top right inside the frame
  series.forEach((s, i) => {
    const y = MARGIN.top + 14 + i * 16;
    const x = MARGIN.left + innerW - 150;
    const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
    parts.push(
      `<line x1="${x}" y1="${y - 4}" x2="${x + 22}" y2="${y - 4}" ` +
        `stroke="${esc(s.color)}" stroke-width="1.8"${dash}/>`,
      `<text x="${x + 28}" y="${y}" class="chart-legend">${esc(s.label)}</text>`
    );
  });

  parts.push("</svg>");
  return parts.join("");
}
