import init, { sampleBundles, predictionError, destinationLearning } from "./pkg/cmltraj_web.js";

const CML = "#c0392b", MARKOV = "#2c7fb8", STD = "#555";
const num = (id) => Number(document.getElementById(id).value);
const status = (msg) => { document.getElementById("status").textContent = msg; };
const scenario = () => [num("seed"), num("q"), num("dx"), num("dy"), num("dv"), num("mv")];

function frame(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  const pad = 40, w = canvas.width - 2 * pad, h = canvas.height - 2 * pad;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * w;
  const sy = (y) => pad + h - ((y - y0) / (y1 - y0 || 1)) * h;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999"; ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#333"; ctx.font = "11px sans-serif";
  ctx.fillText(x0.toPrecision(4), pad, canvas.height - pad + 14);
  ctx.fillText(x1.toPrecision(4), pad + w - 40, canvas.height - pad + 14);
  ctx.fillText(y1.toPrecision(4), 2, pad + 4);
  ctx.fillText(y0.toPrecision(4), 2, pad + h);
  return { ctx, sx, sy };
}

function polyline(ctx, sx, sy, pts, color, alpha = 1) {
  ctx.globalAlpha = alpha; ctx.strokeStyle = color; ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
  ctx.stroke(); ctx.globalAlpha = 1;
}

function drawBundles() {
  const runs = num("runs1");
  const [seed, q, dx, dy, dv] = scenario();
  const flat = sampleBundles(seed, runs, q, dx, dy, dv);
  const n = flat[0], len = (n + 1) * 2;
  const traj = (m, r) => {
    const off = 1 + (m * runs + r) * len, pts = [];
    for (let k = 0; k <= n; k++) pts.push([flat[off + 2 * k], flat[off + 2 * k + 1]]);
    return pts;
  };
  const all = [];
  for (let m = 0; m < 2; m++) for (let r = 0; r < runs; r++) all.push([m, traj(m, r)]);
  const xs = all.flatMap(([, p]) => p.map((v) => v[0]));
  const ys = all.flatMap(([, p]) => p.map((v) => v[1]));
  const { ctx, sx, sy } = frame(document.getElementById("c1"), xs, ys);
  for (const [m, p] of all) polyline(ctx, sx, sy, p, m ? MARKOV : CML, 0.5);
}

function drawCurves() {
  const [seed, q, dx, dy, dv, mv] = scenario();
  const flat = predictionError(seed, num("runs2"), num("until"), q, dx, dy, dv, mv);
  const rows = [];
  for (let i = 0; i < flat.length; i += 3) rows.push(flat.slice(i, i + 3));
  const lg = (v) => Math.log10(Math.max(v, 1e-12));
  const cml = rows.map((r) => [r[0], lg(r[1])]), mk = rows.map((r) => [r[0], lg(r[2])]);
  const { ctx, sx, sy } = frame(
    document.getElementById("c2"),
    rows.map((r) => r[0]),
    cml.concat(mk).map((p) => p[1]),
  );
  polyline(ctx, sx, sy, cml, CML);
  polyline(ctx, sx, sy, mk, MARKOV);
  const last = rows[rows.length - 1];
  status(`error at step ${last[0]}: Markov ${last[2].toFixed(1)}, destination-conditioned ${last[1].toFixed(1)}`);
}

function drawLearning() {
  const flat = destinationLearning(...scenario());
  const std = [], dest = [], pos = [];
  for (let i = 0; i < flat.length; i += 4) {
    const k = flat[i];
    std.push([k, flat[i + 1]]); dest.push([k, flat[i + 2]]); pos.push([k, flat[i + 3]]);
  }
  const all = std.concat(dest, pos);
  const { ctx, sx, sy } = frame(document.getElementById("c3"), all.map((p) => p[0]), all.map((p) => p[1]));
  polyline(ctx, sx, sy, std, STD);
  polyline(ctx, sx, sy, dest, CML);
  polyline(ctx, sx, sy, pos, MARKOV);
}

const guarded = (f) => () => {
  status("");
  try { f(); } catch (e) { status(String(e.message ?? e)); }
};

await init();
document.getElementById("go1").onclick = guarded(drawBundles);
document.getElementById("go2").onclick = guarded(drawCurves);
document.getElementById("go3").onclick = guarded(drawLearning);
guarded(drawBundles)();
guarded(drawCurves)();
guarded(drawLearning)();
