// Pointing readout: azimuth needle, elevation arc, slant range text.

import { ViewModel } from "./viewmodel.js";

export class CompassView {
  constructor(
    private canvas: HTMLCanvasElement,
    private vm: ViewModel,
  ) {}

  render(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) {
      return;
    }
    const w = this.canvas.width;
    const h = this.canvas.height;
    const cx = w / 2;
    const cy = h / 2 + 6;
    const radius = Math.min(w, h) / 2 - 18;
    ctx.clearRect(0, 0, w, h);

    ctx.strokeStyle = "#546e7a";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.arc(cx, cy, radius, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.fillStyle = "#90a4ae";
    ctx.font = "11px monospace";
    ctx.textAlign = "center";
    for (const [label, angle] of [
      ["N", 0],
      ["E", 90],
      ["S", 180],
      ["W", 270],
    ] as const) {
      const rad = ((angle - 90) * Math.PI) / 180;
      ctx.fillText(
        label,
        cx + (radius + 10) * Math.cos(rad),
        cy + (radius + 10) * Math.sin(rad) + 4,
      );
    }

    const pointing = this.vm.pointing;
    if (!pointing || !this.vm.target) {
      ctx.fillText("no target", cx, cy);
      ctx.textAlign = "left";
      return;
    }

    if (!pointing.azimuth_undefined) {
      const rad = ((pointing.azimuth_deg - 90) * Math.PI) / 180;
      ctx.strokeStyle = "#ff3b30";
      ctx.lineWidth = 3;
      ctx.beginPath();
      ctx.moveTo(cx, cy);
      ctx.lineTo(cx + radius * 0.9 * Math.cos(rad), cy + radius * 0.9 * Math.sin(rad));
      ctx.stroke();
    }

    ctx.fillStyle = "#eceff1";
    ctx.font = "12px monospace";
    const azText = pointing.azimuth_undefined
      ? "az ---"
      : `az ${pointing.azimuth_deg.toFixed(1)}`;
    const range =
      pointing.slant_range_m >= 1000
        ? `${(pointing.slant_range_m / 1000).toFixed(2)} km`
        : `${Math.round(pointing.slant_range_m)} m`;
    ctx.fillText(azText, cx, h - 30);
    ctx.fillText(`el ${pointing.elevation_deg.toFixed(1)}  ${range}`, cx, h - 16);
    ctx.textAlign = "left";
  }
}
