/**
 * Minimal canvas line charts; no dependencies. Each draw call renders the
 * whole chart from the series passed in (no retained state), so chart output
 * is a pure function of the series.
 */

export interface Line {
  label: string;
  color: string;
  xs: number[];
  ys: number[];
  dashed?: boolean;
}

interface Extent {
  min: number;
  max: number;
}

function extent(values: number[][], padFrac = 0.08): Extent {
  let min = Infinity;
  let max = -Infinity;
  for (const arr of values) {
    for (const v of arr) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  if (!Number.isFinite(min) || !Number.isFinite(max)) return { min: 0, max: 1 };
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  const pad = (max - min) * padFrac;
  return { min: min - pad, max: max + pad };
}

const MARGIN = { left: 46, right: 10, top: 22, bottom: 24 };

export function drawChart(canvas: HTMLCanvasElement, title: string, lines: Line[],
                          opts: { square?: boolean; xLabel?: string; yLabel?: string } = {}): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#15181d";
  ctx.fillRect(0, 0, w, h);

  const xs = extent(lines.map((l) => l.xs));
  const ys = extent(lines.map((l) => l.ys));
  if (opts.square) {
    // equal scale for trajectory views
    const spanX = xs.max - xs.min;
    const spanY = ys.max - ys.min;
    const span = Math.max(spanX, spanY);
    const cx = (xs.min + xs.max) / 2;
    const cy = (ys.min + ys.max) / 2;
    xs.min = cx - span / 2;
    xs.max = cx + span / 2;
    ys.min = cy - span / 2;
    ys.max = cy + span / 2;
  }

  const plotW = w - MARGIN.left - MARGIN.right;
  const plotH = h - MARGIN.top - MARGIN.bottom;
  const toX = (v: number) => MARGIN.left + ((v - xs.min) / (xs.max - xs.min)) * plotW;
  const toY = (v: number) => MARGIN.top + (1 - (v - ys.min) / (ys.max - ys.min)) * plotH;

  // frame + gridlines
  ctx.strokeStyle = "#2c313a";
  ctx.lineWidth = 1;
  ctx.strokeRect(MARGIN.left, MARGIN.top, plotW, plotH);
  ctx.fillStyle = "#8b93a1";
  ctx.font = "10px system-ui, sans-serif";
  for (let i = 0; i <= 4; i++) {
    const gy = MARGIN.top + (plotH * i) / 4;
    const vy = ys.max - ((ys.max - ys.min) * i) / 4;
    ctx.beginPath();
    ctx.moveTo(MARGIN.left, gy);
    ctx.lineTo(MARGIN.left + plotW, gy);
    ctx.strokeStyle = "#232830";
    ctx.stroke();
    ctx.fillText(vy.toFixed(2), 4, gy + 3);
    const gx = MARGIN.left + (plotW * i) / 4;
    const vx = xs.min + ((xs.max - xs.min) * i) / 4;
    ctx.fillText(vx.toFixed(1), gx - 8, h - 8);
  }

  for (const line of lines) {
    ctx.strokeStyle = line.color;
    ctx.lineWidth = 1.5;
    ctx.setLineDash(line.dashed ? [5, 4] : []);
    ctx.beginPath();
    let started = false;
    const n = Math.min(line.xs.length, line.ys.length);
    for (let i = 0; i < n; i++) {
      const px = toX(line.xs[i]!);
      const py = toY(line.ys[i]!);
      if (!started) {
        ctx.moveTo(px, py);
        started = true;
      } else {
        ctx.lineTo(px, py);
      }
    }
    ctx.stroke();
  }
  ctx.setLineDash([]);

  // title + legend
  ctx.fillStyle = "#dfe4ec";
  ctx.font = "12px system-ui, sans-serif";
  ctx.fillText(title, MARGIN.left, 14);
  let lx = MARGIN.left + ctx.measureText(title).width + 16;
  for (const line of lines) {
    ctx.fillStyle = line.color;
    ctx.fillRect(lx, 7, 10, 3);
    ctx.fillStyle = "#8b93a1";
    ctx.fillText(line.label, lx + 14, 14);
    lx += 14 + ctx.measureText(line.label).width + 12;
  }
}
