import init, { loss_curve, heatmap_svg, reweight_demo } from "./pkg/vsgd_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const ALGOS = [
  ["sgd", "#888"],
  ["adagrad", "#2a2"],
  ["natural", "#a6a"],
  ["vsgd", "#e80"],
  ["vsgd-fd", "#c00"],
];

function report(el, f) {
  el.textContent = "";
  el.className = "";
  try {
    f();
  } catch (e) {
    el.textContent = String(e);
    el.className = "err";
  }
}

function drawCurves() {
  const ctx = $("curve").getContext("2d");
  const { width: w, height: h } = ctx.canvas;
  const curves = ALGOS.map(([algo, color]) => [
    algo,
    color,
    Array.from(loss_curve($("lc-func").value, num("lc-a"), num("lc-var"), algo, num("lc-n"), 0.1, num("lc-steps"), num("lc-seed")), (l) => Math.log10(Math.max(l, 1e-300))),
  ]);
  const all = curves.flatMap(([, , c]) => c);
  const lo = Math.min(...all), hi = Math.max(...all);
  const steps = num("lc-steps");
  const y = (v) => h - 10 - ((v - lo) / (hi - lo || 1)) * (h - 20);
  ctx.clearRect(0, 0, w, h);
  curves.forEach(([algo, color, c], k) => {
    ctx.strokeStyle = color;
    ctx.beginPath();
    c.forEach((v, t) => (t ? ctx.lineTo : ctx.moveTo).call(ctx, (t / steps) * w, y(v)));
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(algo + (c.length <= steps ? " (diverged)" : ""), w - 110, 16 + 14 * k);
  });
  ctx.fillStyle = "#000";
  ctx.fillText(hi.toFixed(2), 2, 12);
  ctx.fillText(lo.toFixed(2), 2, h - 2);
}

function drawHeatmap() {
  $("heatmap").innerHTML = heatmap_svg($("hm-func").value, $("hm-algo").value, 1, num("hm-eta"), num("hm-trials"), num("hm-updates"), 1);
}

function drawCloud() {
  const n = num("rw-n");
  const v = reweight_demo(n, num("rw-seed"));
  const ctx = $("cloud").getContext("2d");
  const { width: w, height: h } = ctx.canvas;
  const s = w / 6;
  const px = (x) => w / 2 + x * s, py = (y) => h / 2 - y * s;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(0, h / 2); ctx.lineTo(w, h / 2); ctx.moveTo(w / 2, 0); ctx.lineTo(w / 2, h);
  ctx.stroke();
  ctx.fillStyle = "#aaa";
  for (let j = 0; j < n; j++) ctx.fillRect(px(v[8 + 2 * j]) - 2, py(v[9 + 2 * j]) - 2, 4, 4);
  [["#00c", 0], ["#c00", 2], ["#000", 4]].forEach(([color, i]) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(px(0), py(0));
    ctx.lineTo(px(v[i]), py(v[i + 1]));
    ctx.stroke();
  });
  ctx.lineWidth = 1;
  $("rw-msg").textContent = `cosine to oracle: average ${v[6].toFixed(4)}, reweighted ${v[7].toFixed(4)}`;
}

await init();
$("lc-run").onclick = () => report($("lc-msg"), drawCurves);
$("hm-run").onclick = () => report($("hm-msg"), drawHeatmap);
$("rw-run").onclick = () => report($("rw-msg"), drawCloud);
report($("lc-msg"), drawCurves);
report($("rw-msg"), drawCloud);
