import init, { renderJulia, renderMultibrot, findMisiurewicz } from "./pkg/corrdyn_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const status = (msg) => { $("status").textContent = msg; };

function view() {
  return { p: num("p"), q: num("q"), cre: num("cre"), cim: num("cim"), width: num("width"), px: num("px"), iter: num("iter") };
}

function paint(canvas, rgba, px) {
  canvas.width = px;
  canvas.height = px;
  const img = new ImageData(new Uint8ClampedArray(rgba), px, px);
  canvas.getContext("2d").putImageData(img, 0, 0);
}

function timed(label, fn) {
  status(`${label}…`);
  // Yield once so the status text is drawn before the blocking call.
  setTimeout(() => {
    const t = performance.now();
    try {
      fn();
      status(`${label}: ${(performance.now() - t).toFixed(0)} ms`);
    } catch (e) {
      status(`${label} failed: ${e}`);
    }
  }, 0);
}

function drawMultibrot() {
  const v = view();
  timed("Multibrot", () => {
    paint($("canvas-m"), renderMultibrot(v.p, v.q, v.cre, v.cim, v.width, v.px, v.px, v.iter), v.px);
  });
}

function drawJulia() {
  const v = view();
  timed("Julia", () => {
    const rgba = renderJulia(v.p, v.q, num("jre"), num("jim"), 0, 0, 4, v.px, v.px, v.iter);
    paint($("canvas-j"), rgba, v.px);
  });
}

function find() {
  timed("Finder", () => {
    const json = findMisiurewicz(num("p"), num("q"), num("gre"), num("gim"), $("signs").value.trim(), num("pre"), num("per"));
    const r = JSON.parse(json);
    $("report").textContent = JSON.stringify(r, null, 2);
    [$("jre").value, $("jim").value] = r.a;
  });
}

// Clicking the parameter plane selects c for the Julia render.
$("canvas-m").addEventListener("click", (ev) => {
  const v = view();
  const rect = ev.target.getBoundingClientRect();
  const s = v.width / rect.width;
  $("jre").value = (v.cre - v.width / 2 + (ev.clientX - rect.left) * s).toPrecision(8);
  $("jim").value = (v.cim + v.width / 2 - (ev.clientY - rect.top) * s).toPrecision(8);
  drawJulia();
});

$("btn-m").addEventListener("click", drawMultibrot);
$("btn-j").addEventListener("click", drawJulia);
$("btn-f").addEventListener("click", find);

await init();
status("ready");
drawMultibrot();
