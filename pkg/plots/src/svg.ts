/** Minimal deterministic SVG scene builder: no DOM, plain string assembly. */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

const FMT = (v: number) => (Number.isFinite(v) ? +v.toFixed(3) : 0);

export class LinearScale {
  constructor(
    public d0: number,
    public d1: number,
    public r0: number,
    public r1: number,
  ) {
    if (d0 === d1) {
      this.d0 -= 0.5;
      this.d1 += 0.5;
    }
  }

  map(v: number): number {
    return this.r0 + ((v - this.d0) / (this.d1 - this.d0)) * (this.r1 - this.r0);
  }

  ticks(n = 6): number[] {
    const span = this.d1 - this.d0;
    const step = Math.pow(10, Math.floor(Math.log10(span / n)));
    const err = (span / n) / step;
    const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
    const s = step * mult;
    const start = Math.ceil(this.d0 / s) * s;
    const out: number[] = [];
    for (let v = start; v <= this.d1 + 1e-12 * Math.abs(s); v += s) out.push(+v.toFixed(12));
    return out;
  }
}

/** log10 scale; nonpositive values are clamped to the floor decade. */
export class LogScale {
  inner: LinearScale;

  constructor(
    public d0: number,
    public d1: number,
    r0: number,
    r1: number,
  ) {
    this.inner = new LinearScale(Math.log10(d0), Math.log10(d1), r0, r1);
  }

  map(v: number): number {
    const clamped = Math.max(v, this.d0);
    return this.inner.map(Math.log10(clamped));
  }

  ticks(): number[] {
    const lo = Math.ceil(Math.log10(this.d0));
    const hi = Math.floor(Math.log10(this.d1));
    const out: number[] = [];
    const stride = Math.max(1, Math.ceil((hi - lo) / 8));
    for (let e = lo; e <= hi; e += stride) out.push(Math.pow(10, e));
    return out;
  }
}

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

/** Blue -> white -> red diverging fill for scalar fields. */
export function heatColor(t: number): string {
  const u = Math.max(0, Math.min(1, t));
  const stops: [number, number, number][] = [
    [49, 54, 149],
    [224, 243, 248],
    [165, 0, 38],
  ];
  const pos = u * 2;
  const i = Math.min(1, Math.floor(pos));
  const frac = pos - i;
  const c = stops[i].map((a, k) => Math.round(a + frac * (stops[i + 1][k] - a)));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

export class Figure {
  parts: string[] = [];

  constructor(
    public width: number,
    public height: number,
  ) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${FMT(x1)}" y1="${FMT(y1)}" x2="${FMT(x2)}" y2="${FMT(y2)}" stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  polyline(points: [number, number][], stroke: string, width = 1.5, dash = ""): void {
    const pts = points.map(([x, y]) => `${FMT(x)},${FMT(y)}`).join(" ");
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(`<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${width}"${d}/>`);
  }

  circle(x: number, y: number, r: number, fill: string, opacity = 1): void {
    this.parts.push(`<circle cx="${FMT(x)}" cy="${FMT(y)}" r="${r}" fill="${fill}" fill-opacity="${opacity}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(`<rect x="${FMT(x)}" y="${FMT(y)}" width="${FMT(w)}" height="${FMT(h)}" fill="${fill}"/>`);
  }

  path(d: string, stroke: string, fill = "none", width = 1, opacity = 1): void {
    this.parts.push(`<path d="${d}" stroke="${stroke}" fill="${fill}" stroke-width="${width}" opacity="${opacity}"/>`);
  }

  text(x: number, y: number, content: string, size = 11, anchor = "start", rotate = 0): void {
    const t = rotate ? ` transform="rotate(${rotate} ${FMT(x)} ${FMT(y)})"` : "";
    this.parts.push(
      `<text x="${FMT(x)}" y="${FMT(y)}" font-size="${size}" text-anchor="${anchor}"${t}>${escapeXml(content)}</text>`,
    );
  }

  arrow(x: number, y: number, dx: number, dy: number, stroke: string, width = 1): void {
    const x2 = x + dx;
    const y2 = y + dy;
    this.line(x, y, x2, y2, stroke, width);
    const len = Math.hypot(dx, dy);
    if (len < 1e-9) return;
    const ux = dx / len;
    const uy = dy / len;
    const s = Math.min(4, len * 0.4);
    this.line(x2, y2, x2 - s * (ux + 0.5 * uy), y2 - s * (uy - 0.5 * ux), stroke, width);
    this.line(x2, y2, x2 - s * (ux - 0.5 * uy), y2 - s * (uy + 0.5 * ux), stroke, width);
  }

  axes(
    xs: LinearScale,
    ys: LinearScale | LogScale,
    opts: { xLabel?: string; yLabel?: string; title?: string } = {},
  ): void {
    const [left, right] = [xs.r0, xs.r1];
    const bottom = ys instanceof LogScale ? ys.inner.r0 : ys.r0;
    const top = ys instanceof LogScale ? ys.inner.r1 : ys.r1;
    this.line(left, bottom, right, bottom, "#000");
    this.line(left, bottom, left, top, "#000");
    for (const v of xs.ticks()) {
      const x = xs.map(v);
      this.line(x, bottom, x, bottom + 4, "#000");
      this.text(x, bottom + 16, formatTick(v), 10, "middle");
    }
    const yticks = ys.ticks();
    for (const v of yticks) {
      const y = ys.map(v);
      this.line(left - 4, y, left, y, "#000");
      this.text(left - 6, y + 3, formatTick(v), 10, "end");
    }
    if (opts.xLabel) this.text((left + right) / 2, bottom + 32, opts.xLabel, 12, "middle");
    if (opts.yLabel) this.text(left - 44, (top + bottom) / 2, opts.yLabel, 12, "middle", -90);
    if (opts.title) this.text((left + right) / 2, 16, opts.title, 13, "middle");
  }

  legend(entries: { label: string; color: string; dash?: string }[], x: number, y: number): void {
    entries.forEach((e, i) => {
      const yy = y + i * 16;
      this.line(x, yy, x + 22, yy, e.color, 2, e.dash ?? "");
      this.text(x + 28, yy + 4, e.label, 10);
    });
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function formatTick(v: number): string {
  const a = Math.abs(v);
  if (a !== 0 && (a < 1e-3 || a >= 1e5)) {
    const e = Math.floor(Math.log10(a));
    const m = v / Math.pow(10, e);
    const mm = Math.abs(m - 1) < 1e-9 ? "" : `${+m.toFixed(2)}x`;
    return `${mm}1e${e}`;
  }
  return `${+v.toFixed(6)}`;
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
