import init, { reward_curve, pass_at_k_curve, simulate_scaling } from "./pkg/parallel_thinking_web.js";

const PAD = 40;

function axes(ctx, w, h, xlabel, ylabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(PAD, 10);
  ctx.lineTo(PAD, h - PAD);
  ctx.lineTo(w - 10, h - PAD);
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.fillText(xlabel, w / 2, h - 8);
  ctx.fillText(ylabel, 4, 20);
  ctx.fillText("0", PAD - 12, h - PAD);
  ctx.fillText("1", PAD - 12, 16);
}

function scaler(canvas, xmin, xmax) {
  const w = canvas.width, h = canvas.height;
  const span = xmax - xmin || 1;
  return {
    x: (v) => PAD + ((v - xmin) / span) * (w - PAD - 10),
    y: (v) => h - PAD - v * (h - PAD - 10),
  };
}

function line(ctx, s, xs, ys, color) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(s.x(x), s.y(ys[i])) : ctx.moveTo(s.x(x), s.y(ys[i]))));
  ctx.stroke();
  ctx.lineWidth = 1;
}

function guarded(errId, fn) {
  const err = document.getElementById(errId);
  try {
    err.textContent = "";
    fn();
  } catch (e) {
    err.textContent = e.message ?? String(e);
  }
}

function plotReward() {
  guarded("reward-err", () => {
    const maxLen = Number(document.getElementById("maxlen").value);
    const curve = JSON.parse(reward_curve(document.getElementById("dist").value, maxLen, 241));
    const canvas = document.getElementById("reward-plot");
    const ctx = canvas.getContext("2d");
    axes(ctx, canvas.width, canvas.height, `length (0 to ${maxLen})`, "reward");
    const s = scaler(canvas, 0, maxLen);
    line(ctx, s, curve.lengths, curve.hard, "#aaa");
    line(ctx, s, curve.lengths, curve.rc, "#1f6fd1");
  });
}

function plotPassK() {
  guarded("passk-err", () => {
    const n = Number(document.getElementById("n").value);
    const c = Number(document.getElementById("c").value);
    const curve = JSON.parse(pass_at_k_curve(n, c));
    const canvas = document.getElementById("passk-plot");
    const ctx = canvas.getContext("2d");
    axes(ctx, canvas.width, canvas.height, `k (1 to ${n})`, "pass@k");
    const s = scaler(canvas, 1, Math.max(n, 2));
    line(ctx, s, curve.ks, curve.values, "#1f6fd1");
    ctx.fillStyle = "#1f6fd1";
    curve.ks.forEach((k, i) => ctx.fillRect(s.x(k) - 2, s.y(curve.values[i]) - 2, 4, 4));
  });
}

const list = (id) => Uint32Array.from(document.getElementById(id).value.split(",").filter((t) => t.trim()).map(Number));

function plotScaling() {
  guarded("scaling-err", () => {
    const curve = JSON.parse(simulate_scaling(
      document.getElementById("params").value,
      list("threads"), list("rounds"), list("verdicts"),
      Number(document.getElementById("runs").value),
      BigInt(document.getElementById("seed").value),
    ));
    const canvas = document.getElementById("scaling-plot");
    const ctx = canvas.getContext("2d");
    axes(ctx, canvas.width, canvas.height, "mean tokens (log)", "accuracy");
    const logs = curve.map((p) => Math.log(p.mean_tokens));
    const s = scaler(canvas, Math.min(...logs), Math.max(...logs));
    const rounds = [...new Set(curve.map((p) => p.max_rounds))];
    const palette = ["#1f6fd1", "#d1521f", "#2a9d4b", "#8a3fd1", "#c9a211"];
    rounds.forEach((m, j) => {
      const pts = curve.filter((p) => p.max_rounds === m);
      const color = palette[j % palette.length];
      ctx.fillStyle = color;
      ctx.strokeStyle = color;
      pts.forEach((p) => {
        const x = s.x(Math.log(p.mean_tokens));
        ctx.beginPath(); ctx.arc(x, s.y(p.accuracy), 4, 0, 2 * Math.PI); ctx.fill();
        ctx.beginPath(); ctx.arc(x, s.y(p.oracle), 4, 0, 2 * Math.PI); ctx.stroke();
      });
      ctx.fillText(`M=${m}`, canvas.width - 60, 20 + 14 * j);
    });
    const rows = curve.map((p) =>
      `<tr><td>${p.label}</td><td>${p.n_runs}</td><td>${Math.round(p.mean_tokens)}</td>` +
      `<td>${p.accuracy.toFixed(3)}</td><td>${p.oracle.toFixed(3)}</td></tr>`);
    document.getElementById("scaling-table").innerHTML =
      "<tr><th>config</th><th>runs</th><th>mean tokens</th><th>accuracy</th><th>oracle</th></tr>" + rows.join("");
  });
}

await init();
document.getElementById("reward-go").onclick = plotReward;
document.getElementById("passk-go").onclick = plotPassK;
document.getElementById("scaling-go").onclick = plotScaling;
plotReward();
plotPassK();
