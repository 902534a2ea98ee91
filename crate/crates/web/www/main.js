import init, { homogenize, compare, mscheck } from "./pkg/homogvi_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function run(outId, fn) {
  const out = $(outId);
  out.classList.remove("err");
  try {
    return fn();
  } catch (e) {
    out.textContent = String(e);
    out.classList.add("err");
    return null;
  }
}

function plot(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const pts = series.flatMap((s) => s.x.map((x, i) => [x, s.y[i]]).filter((p) => p[1] !== null));
  if (pts.length === 0) return;
  const xs = pts.map((p) => p[0]);
  const ys = pts.map((p) => p[1]);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 - y0 < 1e-12) { y0 -= 1; y1 += 1; }
  const pad = 30;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.fillText(y1.toPrecision(4), 2, pad);
  ctx.fillText(y0.toPrecision(4), 2, h - pad);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width || 1;
    ctx.beginPath();
    let pen = false;
    s.x.forEach((x, i) => {
      if (s.y[i] === null) { pen = false; return; }
      if (pen) ctx.lineTo(sx(x), sy(s.y[i])); else ctx.moveTo(sx(x), sy(s.y[i]));
      pen = true;
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, w - pad - 120, pad + 14 * (k + 1));
  });
}

function cellConfig() {
  return {
    dimension: 1,
    coefficient: { entries: [[$("cell-a").value]], alpha: num("cell-alpha"), beta: num("cell-beta") },
    cell: { n_micro: num("cell-nz"), n_meso: num("cell-ny") },
  };
}

function runCell() {
  const r = run("cell-out", () => JSON.parse(homogenize(JSON.stringify(cellConfig()))));
  if (!r) return;
  $("cell-out").textContent =
    `A* = ${r.a_star[0][0].toPrecision(12)}   (${r.strategy}, ${r.micro_solves} micro solves, energy gap ${r.energy_gap.toExponential(2)})`;
  plot($("cell-plot"), [
    { x: r.meso_points.map((p) => p[0]), y: r.a_tilde.map((m) => m[0][0]), color: "#1f77b4", label: "Ã(y)", width: 2 },
    { x: [0, 1], y: [r.a_star[0][0], r.a_star[0][0]], color: "#d62728", label: "A*" },
  ]);
}

function runCompare() {
  const inv = 2 ** num("cmp-eps");
  $("cmp-inv").textContent = inv;
  const a = $("cmp-a").value;
  const micro = /z1/.test(a);
  const period = micro ? 1 / (inv * inv) : 1 / inv;
  const n = Math.max(256, Math.ceil(16 / period));
  const config = {
    dimension: 1,
    coefficient: { entries: [[a]], alpha: num("cmp-alpha"), beta: num("cmp-beta") },
    obstacle: { psi0: $("cmp-psi0").value, g: $("cmp-g").value, g_order: num("cmp-p") },
    load: $("cmp-f").value,
    cell: { n_micro: 64, n_meso: 64 },
    macro: { subdivisions: 512 },
    epsilon: { eps: 1 / inv, subdivisions: n },
  };
  const r = run("cmp-out", () => JSON.parse(compare(JSON.stringify(config))));
  if (!r) return;
  $("cmp-out").textContent =
    `‖u_ε − u₀‖_L² = ${r.l2_error.toExponential(3)}   A* = ${r.a_star[0][0].toPrecision(8)}   ` +
    `${n} elements, ${r.iterations} active-set iterations`;
  plot($("cmp-plot"), [
    { x: r.x, y: r.psi_eps, color: "#7f7f7f", label: "ψ_ε" },
    { x: r.x, y: r.u_eps, color: "#1f77b4", label: "u_ε", width: 2 },
    { x: r.x0, y: r.u0, color: "#d62728", label: "u₀", width: 2 },
  ]);
}

function runMs() {
  const config = {
    dimension: 1,
    mscheck: { w: $("ms-w").value, phi: $("ms-phi").value, v: $("ms-v").value, eps: [0.25, 0.125, 0.0625, 0.03125, 0.015625] },
  };
  const rows = run("ms-out", () => JSON.parse(mscheck(JSON.stringify(config))));
  if (!rows) return;
  const body = rows
    .map((r) => `<tr><td>1/${Math.round(1 / r.eps)}</td><td>${r.integral.toPrecision(10)}</td><td>${r.limit.toPrecision(10)}</td><td>${r.gap.toExponential(3)}</td></tr>`)
    .join("");
  $("ms-out").innerHTML = `<table><tr><th>ε</th><th>I_ε</th><th>limit</th><th>gap</th></tr>${body}</table>`;
}

await init();
$("cell-run").addEventListener("click", runCell);
$("cmp-eps").addEventListener("input", runCompare);
["cmp-a", "cmp-psi0", "cmp-g", "cmp-f", "cmp-p", "cmp-alpha", "cmp-beta"].forEach((id) => $(id).addEventListener("change", runCompare));
$("ms-run").addEventListener("click", runMs);
runCell();
runCompare();
runMs();
