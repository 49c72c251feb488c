// Canvas map: offline-first. Draws cached tiles when the service has a
// local tile directory, otherwise a lat/lon graticule with a scale bar.

import { ViewModel } from "./viewmodel.js";
import type { FixDict } from "./types.js";

const TILE_SIZE = 256;
const TAIL_COLORS = ["#4fc3f7", "#ffb74d", "#ba68c8", "#81c784", "#f06292"];
const TARGET_COLOR = "#ff3b30"; // balloon path drawn in red

interface Viewport {
  centerLat: number;
  centerLon: number;
  zoom: number; // slippy-map zoom level
}

function metersPerDegLon(lat: number): number {
  return 111319.49 * Math.cos((lat * Math.PI) / 180);
}

export class MapView {
  viewport: Viewport = { centerLat: 39.0, centerLon: -76.9, zoom: 11 };
  tilesAvailable = false;
  private followTarget = true;
  private tiles = new Map<string, HTMLImageElement>();

  constructor(
    private canvas: HTMLCanvasElement,
    private vm: ViewModel,
  ) {
    canvas.addEventListener("wheel", (event) => {
      event.preventDefault();
      this.viewport.zoom = Math.min(
        16,
        Math.max(4, this.viewport.zoom - Math.sign(event.deltaY)),
      );
      this.render();
    });
    let dragging: { x: number; y: number } | null = null;
    canvas.addEventListener("pointerdown", (event) => {
      dragging = { x: event.offsetX, y: event.offsetY };
      this.followTarget = false;
    });
    canvas.addEventListener("pointermove", (event) => {
      if (!dragging) {
        return;
      }
      const scale = this.metersPerPixel();
      this.viewport.centerLat += ((event.offsetY - dragging.y) * scale) / 111132.95;
      this.viewport.centerLon -=
        ((event.offsetX - dragging.x) * scale) /
        metersPerDegLon(this.viewport.centerLat);
      dragging = { x: event.offsetX, y: event.offsetY };
      this.render();
    });
    canvas.addEventListener("pointerup", () => (dragging = null));
    canvas.addEventListener("dblclick", () => {
      this.followTarget = true;
      this.render();
    });
  }

  private metersPerPixel(): number {
    return (
      (156543.03 * Math.cos((this.viewport.centerLat * Math.PI) / 180)) /
      2 ** this.viewport.zoom
    );
  }

  private project(lat: number, lon: number): [number, number] {
    const scale = this.metersPerPixel();
    const dx =
      ((lon - this.viewport.centerLon) * metersPerDegLon(this.viewport.centerLat)) /
      scale;
    const dy = ((this.viewport.centerLat - lat) * 111132.95) / scale;
    return [this.canvas.width / 2 + dx, this.canvas.height / 2 + dy];
  }

  render(nowS?: number): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) {
      return;
    }
    if (this.followTarget && this.vm.target) {
      const tail = this.vm.stations[this.vm.target]?.fixes;
      const last = tail && tail[tail.length - 1];
      if (last) {
        this.viewport.centerLat = last.lat;
        this.viewport.centerLon = last.lon;
      }
    }
    ctx.fillStyle = "#10151c";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.tilesAvailable) {
      this.drawTiles(ctx);
    }
    this.drawGraticule(ctx);
    this.drawScaleBar(ctx);

    const names = Object.keys(this.vm.stations).sort();
    names.forEach((call, index) => {
      const color =
        call === this.vm.target
          ? TARGET_COLOR
          : TAIL_COLORS[index % TAIL_COLORS.length];
      this.drawTail(ctx, this.vm.tailPolyline(call, nowS), color);
    });
    names.forEach((call, index) => {
      const color =
        call === this.vm.target
          ? TARGET_COLOR
          : TAIL_COLORS[index % TAIL_COLORS.length];
      this.drawStation(ctx, call, color, nowS);
    });
    this.drawOwn(ctx);
  }

  private tileUrl(z: number, x: number, y: number): string {
    return `/tiles/${z}/${x}/${y}.png`; // always same-origin
  }

  private drawTiles(ctx: CanvasRenderingContext2D): void {
    const z = Math.round(this.viewport.zoom);
    const n = 2 ** z;
    const latRad = (this.viewport.centerLat * Math.PI) / 180;
    const centerX = ((this.viewport.centerLon + 180) / 360) * n;
    const centerY =
      ((1 - Math.log(Math.tan(latRad) + 1 / Math.cos(latRad)) / Math.PI) / 2) * n;
    const spanX = this.canvas.width / TILE_SIZE / 2 + 1;
    const spanY = this.canvas.height / TILE_SIZE / 2 + 1;
    for (let x = Math.floor(centerX - spanX); x <= centerX + spanX; x++) {
      for (let y = Math.floor(centerY - spanY); y <= centerY + spanY; y++) {
        if (x < 0 || y < 0 || x >= n || y >= n) {
          continue;
        }
        const key = `${z}/${x}/${y}`;
        let img = this.tiles.get(key);
        if (!img) {
          img = new Image();
          img.src = this.tileUrl(z, x, y);
          img.onload = () => this.render();
          this.tiles.set(key, img);
        }
        if (img.complete && img.naturalWidth > 0) {
          ctx.drawImage(
            img,
            this.canvas.width / 2 + (x - centerX) * TILE_SIZE,
            this.canvas.height / 2 + (y - centerY) * TILE_SIZE,
          );
        }
      }
    }
  }

  private drawGraticule(ctx: CanvasRenderingContext2D): void {
    const scale = this.metersPerPixel();
    const spanDeg = (this.canvas.width * scale) / 111000;
    const step = [5, 2, 1, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01].find(
      (s) => spanDeg / s <= 12,
    ) ?? 0.01;
    ctx.strokeStyle = "rgba(120, 144, 156, 0.35)";
    ctx.fillStyle = "rgba(120, 144, 156, 0.8)";
    ctx.font = "10px monospace";
    ctx.lineWidth = 1;
    const lat0 = Math.floor((this.viewport.centerLat - spanDeg) / step) * step;
    for (let lat = lat0; lat < this.viewport.centerLat + spanDeg; lat += step) {
      const [, y] = this.project(lat, this.viewport.centerLon);
      ctx.beginPath();
      ctx.moveTo(0, y);
      ctx.lineTo(this.canvas.width, y);
      ctx.stroke();
      ctx.fillText(lat.toFixed(2), 4, y - 2);
    }
    const lon0 = Math.floor((this.viewport.centerLon - spanDeg) / step) * step;
    for (let lon = lon0; lon < this.viewport.centerLon + spanDeg; lon += step) {
      const [x] = this.project(this.viewport.centerLat, lon);
      ctx.beginPath();
      ctx.moveTo(x, 0);
      ctx.lineTo(x, this.canvas.height);
      ctx.stroke();
      ctx.fillText(lon.toFixed(2), x + 2, this.canvas.height - 4);
    }
  }

  private drawScaleBar(ctx: CanvasRenderingContext2D): void {
    const scale = this.metersPerPixel();
    const targetPx = 120;
    const niceMeters = [50, 100, 200, 500, 1000, 2000, 5000, 10000, 20000, 50000];
    const meters =
      niceMeters.find((m) => m / scale >= targetPx * 0.6) ??
      niceMeters[niceMeters.length - 1];
    const px = meters / scale;
    const y = this.canvas.height - 16;
    ctx.strokeStyle = "#eceff1";
    ctx.fillStyle = "#eceff1";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(16, y);
    ctx.lineTo(16 + px, y);
    ctx.stroke();
    ctx.font = "11px monospace";
    const label = meters >= 1000 ? `${meters / 1000} km` : `${meters} m`;
    ctx.fillText(label, 16, y - 4);
  }

  private drawTail(
    ctx: CanvasRenderingContext2D,
    fixes: FixDict[],
    color: string,
  ): void {
    if (fixes.length < 2) {
      return;
    }
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    fixes.forEach((fix, i) => {
      const [x, y] = this.project(fix.lat, fix.lon);
      if (i === 0) {
        ctx.moveTo(x, y);
      } else {
        ctx.lineTo(x, y); // gaps bridge as a single straight segment
      }
    });
    ctx.stroke();
  }

  private drawStation(
    ctx: CanvasRenderingContext2D,
    call: string,
    color: string,
    nowS?: number,
  ): void {
    const station = this.vm.stations[call];
    const last = station.fixes[station.fixes.length - 1];
    if (!last) {
      return;
    }
    const [x, y] = this.project(last.lat, last.lon);
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(x, y, 6, 0, 2 * Math.PI);
    ctx.fill();
    ctx.font = "12px monospace";
    ctx.fillStyle = "#eceff1";
    const age = this.vm.packetAgeS(call, nowS);
    const ageText = age === null ? "" : `  ${formatAge(age)}`;
    const altText =
      station.altitude_m === null ? "" : ` ${Math.round(station.altitude_m)}m`;
    ctx.fillText(`${call}${altText}${ageText}`, x + 9, y - 6);
  }

  private drawOwn(ctx: CanvasRenderingContext2D): void {
    const own = this.vm.own;
    if (!own) {
      return;
    }
    const [x, y] = this.project(own.fix.lat, own.fix.lon);
    ctx.fillStyle = "#ffee58";
    ctx.beginPath();
    ctx.moveTo(x, y - 8);
    ctx.lineTo(x - 6, y + 6);
    ctx.lineTo(x + 6, y + 6);
    ctx.closePath();
    ctx.fill();
    ctx.font = "12px monospace";
    ctx.fillText("me", x + 9, y + 4);
  }
}

export function formatAge(seconds: number): string {
  if (seconds < 0) {
    return "0s";
  }
  if (seconds < 90) {
    return `${Math.round(seconds)}s`;
  }
  if (seconds < 5400) {
    return `${Math.round(seconds / 60)}m`;
  }
  return `${(seconds / 3600).toFixed(1)}h`;
}
