// Bootstrap: wire the view model, connection, map, compass, and panels.

import { Connection, BrowserTransport, selectTarget, setTailWindow } from "./net.js";
import { CompassView } from "./compass.js";
import { MapView, formatAge } from "./map.js";
import { ViewModel } from "./viewmodel.js";

const vm = new ViewModel();
const transport = new BrowserTransport();

const mapCanvas = document.getElementById("map") as HTMLCanvasElement;
const compassCanvas = document.getElementById("compass") as HTMLCanvasElement;
const targetSelect = document.getElementById("target") as HTMLSelectElement;
const tailInput = document.getElementById("tail-window") as HTMLInputElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const staleBadge = document.getElementById("stale") as HTMLSpanElement;
const logPane = document.getElementById("packet-log") as HTMLDivElement;
const stationsPane = document.getElementById("stations") as HTMLDivElement;

const map = new MapView(mapCanvas, vm);
const compass = new CompassView(compassCanvas, vm);

function resizeCanvas(): void {
  mapCanvas.width = mapCanvas.clientWidth;
  mapCanvas.height = mapCanvas.clientHeight;
  repaint();
}
window.addEventListener("resize", resizeCanvas);

// Service clock at the newest event, pinned to the wall clock so packet
// ages keep counting between events.
let lastEventWallMs = Date.now();

function displayNow(): number {
  return vm.lastEventTime + (Date.now() - lastEventWallMs) / 1000;
}

let repaintScheduled = false;
function repaint(): void {
  // Frame-rate-bounded: many events per second still paint once.
  lastEventWallMs = Date.now();
  if (repaintScheduled) {
    return;
  }
  repaintScheduled = true;
  requestAnimationFrame(() => {
    repaintScheduled = false;
    paintNow();
  });
}

function paintNow(): void {
  map.render(displayNow());
  compass.render();
  renderBanner();
  renderStations();
  renderTargetOptions();
  renderLog();
}

function renderBanner(): void {
  if (vm.target && vm.targetLost) {
    const station = vm.stations[vm.target];
    const last = station?.fixes[station.fixes.length - 1];
    const where = last
      ? ` last seen ${last.lat.toFixed(4)}, ${last.lon.toFixed(4)} at ${Math.round(
          last.alt_m,
        )} m`
      : "";
    banner.textContent = `SIGNAL LOST: ${vm.target}${where}`;
    banner.classList.add("lost");
  } else {
    banner.textContent = vm.target ? `tracking ${vm.target}` : "no target selected";
    banner.classList.remove("lost");
  }
}

function renderTargetOptions(): void {
  const calls = Object.keys(vm.stations).sort();
  const current = targetSelect.value;
  const wanted = ["", ...calls];
  const existing = Array.from(targetSelect.options).map((o) => o.value);
  if (JSON.stringify(existing) !== JSON.stringify(wanted)) {
    targetSelect.innerHTML = "";
    for (const call of wanted) {
      const option = document.createElement("option");
      option.value = call;
      option.textContent = call === "" ? "(none)" : call;
      targetSelect.appendChild(option);
    }
    targetSelect.value = current;
  }
  if (vm.target !== null && targetSelect.value !== vm.target) {
    targetSelect.value = vm.target;
  }
}

function renderStations(): void {
  const rows = Object.keys(vm.stations)
    .sort()
    .map((call) => {
      const s = vm.stations[call];
      const age = vm.packetAgeS(call, displayNow());
      const alt = s.altitude_m === null ? "-" : `${Math.round(s.altitude_m)} m`;
      return (
        `<div class="station-row${call === vm.target ? " target" : ""}">` +
        `<b>${call}</b> ${alt} · ${s.packet_count} pkts · ` +
        `${age === null ? "-" : formatAge(age)}</div>`
      );
    });
  stationsPane.innerHTML = rows.join("");
}

function renderLog(): void {
  const last = vm.packetLog.slice(-12).reverse();
  logPane.innerHTML = last
    .map(
      (entry) =>
        `<div class="log-row${entry.ok ? "" : " bad"}">${escapeHtml(
          entry.tnc2,
        )}</div>`,
    )
    .join("");
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;" })[c]!);
}

targetSelect.addEventListener("change", () => {
  void selectTarget(transport, targetSelect.value || null);
});

tailInput.addEventListener("change", () => {
  const seconds = Number(tailInput.value);
  if (Number.isFinite(seconds) && seconds > 0) {
    void setTailWindow(transport, vm, seconds).then(repaint);
  }
});

const connection = new Connection(transport, vm, {
  onChange: repaint,
  onStale: (stale) => {
    staleBadge.style.display = stale ? "inline-block" : "none";
  },
});

void transport
  .fetchJson("/tiles-available")
  .then((body) => {
    map.tilesAvailable = Boolean((body as { tiles: boolean }).tiles);
  })
  .catch(() => {
    map.tilesAvailable = false;
  });

resizeCanvas();
void connection.start();

// Packet ages tick locally between events (>= 1 Hz refresh).
setInterval(paintNow, 1000);
