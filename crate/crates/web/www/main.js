// Built by `wasm-bindgen --target web --out-dir www/pkg`.
import init, { compare, cluster, recover } from "./pkg/sevt_web.js";

const METRICS = ["totalvariation", "hellinger", "fisher", "jensenshannon", "kaniadakis", "totalkl"];
const LINKAGES = ["ward.D2", "average", "complete", "mcquitty"];
const PALETTE = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"];

const $ = (id) => document.getElementById(id);

function fillSelect(id, options) {
  $(id).innerHTML = options.map((o) => `<option>${o}</option>`).join("");
}

function showError(el, e) {
  el.innerHTML = `<p class="error">${e.message ?? e}</p>`;
}

function runCompare() {
  const out = $("compare-out");
  try {
    const r = JSON.parse(compare($("p").value, $("q").value));
    const rows = r.metrics
      .map((m) => `<tr><td>${m.name}</td><td>${m.value === null ? m.note : m.value.toFixed(6)}</td></tr>`)
      .join("");
    out.innerHTML = `<table><tr><th>measure</th><th>value</th></tr>${rows}</table>`;
  } catch (e) {
    showError(out, e);
  }
}

// Leaves are ordered by a depth-first walk so branches never cross.
function drawDendrogram(canvas, { n, merges }) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (n < 2) return;
  const children = (id) => (id < n ? [] : [merges[id - n].left, merges[id - n].right]);
  const order = [];
  const walk = (id) => (id < n ? order.push(id) : children(id).forEach(walk));
  walk(n + merges.length - 1);

  const pad = 30;
  const top = Math.max(...merges.map((m) => m.height)) || 1;
  const xs = new Map(order.map((leaf, i) => [leaf, pad + (i * (canvas.width - 2 * pad)) / (n - 1)]));
  const y = (h) => canvas.height - pad - (h / top) * (canvas.height - 2 * pad);
  const heights = new Map(order.map((leaf) => [leaf, 0]));

  ctx.strokeStyle = "#333";
  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  ctx.textAlign = "center";
  order.forEach((leaf) => ctx.fillText(String(leaf), xs.get(leaf), canvas.height - pad + 16));
  merges.forEach((m, t) => {
    const [xl, xr] = [xs.get(m.left), xs.get(m.right)];
    const yt = y(m.height);
    ctx.beginPath();
    ctx.moveTo(xl, y(heights.get(m.left)));
    ctx.lineTo(xl, yt);
    ctx.lineTo(xr, yt);
    ctx.lineTo(xr, y(heights.get(m.right)));
    ctx.stroke();
    xs.set(n + t, (xl + xr) / 2);
    heights.set(n + t, m.height);
  });
}

function runCluster() {
  $("cluster-err").textContent = "";
  try {
    const r = JSON.parse(cluster($("vectors").value, $("cluster-metric").value, $("cluster-linkage").value));
    drawDendrogram($("dendrogram"), r);
  } catch (e) {
    $("cluster-err").textContent = e.message ?? e;
  }
}

// One row per depth: the true staging above, the learned one below.
function drawStagings(canvas, truth, learned) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const depths = truth.length;
  const rowH = (canvas.height - 20) / depths;
  const half = canvas.width / 2;
  ctx.font = "12px sans-serif";
  ctx.fillStyle = "#333";
  ctx.fillText("true", 10, 12);
  ctx.fillText("learned", half + 10, 12);
  [truth, learned].forEach((staging, side) => {
    staging.forEach((labels, d) => {
      const w = (half - 30) / labels.length;
      labels.forEach((l, s) => {
        ctx.fillStyle = PALETTE[l % PALETTE.length];
        ctx.fillRect(side * half + 10 + s * w, 20 + d * rowH, Math.max(w - 1, 1), rowH - 4);
      });
    });
  });
}

function runRecover() {
  const out = $("recover-out");
  try {
    const r = JSON.parse(
      recover(
        Number($("rp").value),
        $("gen").value,
        Number($("rn").value),
        Number($("seed").value),
        $("recover-metric").value,
        $("recover-linkage").value,
        $("k").value,
      ),
    );
    out.innerHTML =
      `<p>Hamming distance to truth: ${r.hd} (saturated model: ${r.hd_saturated}).` +
      ` BIC ${r.bic_learned.toFixed(1)} vs saturated ${r.bic_saturated.toFixed(1)}.</p>`;
    drawStagings($("stagings"), r.truth, r.learned);
  } catch (e) {
    showError(out, e);
  }
}

await init();
for (const id of ["cluster-metric", "recover-metric"]) fillSelect(id, METRICS);
for (const id of ["cluster-linkage", "recover-linkage"]) fillSelect(id, LINKAGES);
$("compare-go").onclick = runCompare;
$("cluster-go").onclick = runCluster;
$("recover-go").onclick = runRecover;
runCompare();
runCluster();
runRecover();
