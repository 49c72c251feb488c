// The view model is a pure fold over (state snapshot, event stream).
// Applying the same snapshot and events always lands on the same
// serialized state, which is what makes reconnects and replays safe.

import type {
  EventRecord,
  FixDict,
  OwnEntry,
  PacketLogEntry,
  PointingEntry,
  StateSnapshot,
  StationEntry,
} from "./types.js";

const PACKET_LOG_LIMIT = 200;

function emptyStation(callsign: string): StationEntry {
  return {
    callsign,
    fixes: [],
    last_heard: 0,
    packet_count: 0,
    kind: null,
    symbol: null,
    course_deg: null,
    speed_knots: null,
    altitude_m: null,
    comment: "",
  };
}

/** Deterministic JSON: object keys sorted at every level. */
export function stableStringify(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return `[${value.map(stableStringify).join(",")}]`;
  }
  const entries = Object.entries(value as Record<string, unknown>)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([k, v]) => `${JSON.stringify(k)}:${stableStringify(v)}`);
  return `{${entries.join(",")}}`;
}

export class ViewModel {
  seq = 0;
  stations: Record<string, StationEntry> = {};
  own: OwnEntry | null = null;
  pointing: PointingEntry | null = null;
  target: string | null = null;
  targetLost = false;
  tailWindowS = 7200;
  lossThresholdS = 120;
  packetLog: PacketLogEntry[] = [];
  /** Time of the newest event; drives packet-age rendering. */
  lastEventTime = 0;

  applySnapshot(snapshot: StateSnapshot): void {
    this.seq = snapshot.seq;
    this.stations = {};
    for (const [call, entry] of Object.entries(snapshot.stations)) {
      this.stations[call] = { ...entry, fixes: [...entry.fixes] };
    }
    this.own = snapshot.own;
    this.pointing = snapshot.pointing;
    this.target = snapshot.config.target;
    this.targetLost = snapshot.target_lost;
    this.tailWindowS = snapshot.config.tail_window_s;
    this.lossThresholdS = snapshot.config.loss_threshold_s;
  }

  /** Apply one event; events at or below the current seq are duplicates
   *  from a reconnect overlap and are dropped. */
  applyEvent(record: EventRecord): boolean {
    if (record.seq <= this.seq) {
      return false;
    }
    this.seq = record.seq;
    this.lastEventTime = Math.max(this.lastEventTime, record.time);
    const payload = record.payload as Record<string, never>;
    switch (record.variant) {
      case "config": {
        const target = (payload["target"] as string | null) ?? null;
        if (target !== this.target) {
          this.targetLost = false;
          this.pointing = null;
        }
        this.target = target;
        this.tailWindowS = payload["tail_window_s"] ?? this.tailWindowS;
        this.lossThresholdS = payload["loss_threshold_s"] ?? this.lossThresholdS;
        break;
      }
      case "station_updated": {
        const call = payload["callsign"] as string;
        const station = this.stations[call] ?? emptyStation(call);
        this.stations[call] = station;
        station.last_heard = payload["last_heard"];
        station.packet_count = payload["packet_count"];
        station.kind = payload["kind"];
        station.symbol = payload["symbol"];
        station.course_deg = payload["course_deg"];
        station.speed_knots = payload["speed_knots"];
        station.altitude_m = payload["altitude_m"];
        station.comment = payload["comment"];
        if (payload["fix_appended"]) {
          station.fixes.push(payload["fix"] as FixDict);
        }
        break;
      }
      case "own_updated":
        this.own = payload as unknown as OwnEntry;
        break;
      case "pointing_updated":
        this.pointing = payload as unknown as PointingEntry;
        break;
      case "signal_lost":
        this.targetLost = true;
        break;
      case "signal_reacquired":
        this.targetLost = false;
        break;
      case "packet_logged":
        this.packetLog.push({
          seq: record.seq,
          time: record.time,
          tnc2: payload["tnc2"],
          ok: payload["ok"],
          error: payload["error"],
          source: payload["source"],
        });
        if (this.packetLog.length > PACKET_LOG_LIMIT) {
          this.packetLog.splice(0, this.packetLog.length - PACKET_LOG_LIMIT);
        }
        break;
      default:
        break; // unknown variants advance seq only
    }
    return true;
  }

  applyEventLine(line: string): boolean {
    return this.applyEvent(JSON.parse(line) as EventRecord);
  }

  /** Fixes inside the tail window, oldest first; consecutive points are
   *  drawn as one polyline, so a reception gap appears as a single
   *  straight segment rather than a break. */
  tailPolyline(callsign: string, nowS?: number): FixDict[] {
    const station = this.stations[callsign];
    if (!station) {
      return [];
    }
    const now = nowS ?? this.lastEventTime;
    const cutoff = now - this.tailWindowS;
    return station.fixes.filter((f) => (f.time ?? 0) >= cutoff);
  }

  packetAgeS(callsign: string, nowS?: number): number | null {
    const station = this.stations[callsign];
    if (!station || station.packet_count === 0) {
      return null;
    }
    return (nowS ?? this.lastEventTime) - station.last_heard;
  }

  /** Replace a station's fixes from a `/stations/{call}/tail` response. */
  replaceTail(callsign: string, fixes: FixDict[]): void {
    const station = this.stations[callsign] ?? emptyStation(callsign);
    this.stations[callsign] = station;
    station.fixes = [...fixes];
  }

  /** Canonical serialized view state (connection status excluded: it is
   *  transport information, not folded state). */
  serialize(): string {
    return stableStringify({
      seq: this.seq,
      stations: this.stations,
      own: this.own,
      pointing: this.pointing,
      target: this.target,
      targetLost: this.targetLost,
      tailWindowS: this.tailWindowS,
      lossThresholdS: this.lossThresholdS,
      packetLog: this.packetLog,
    });
  }
}
