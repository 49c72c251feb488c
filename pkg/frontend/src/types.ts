// Wire types mirrored from the tracking service's JSON schemas.

export interface FixDict {
  lat: number;
  lon: number;
  alt_m: number;
  time: number | null;
}

export interface EventRecord {
  variant: string;
  seq: number;
  time: number;
  payload: Record<string, unknown>;
}

export interface StationEntry {
  callsign: string;
  fixes: FixDict[];
  last_heard: number;
  packet_count: number;
  kind: string | null;
  symbol: [string, string] | null;
  course_deg: number | null;
  speed_knots: number | null;
  altitude_m: number | null;
  comment: string;
}

export interface OwnEntry {
  fix: FixDict;
  course_deg: number | null;
  speed_knots: number | null;
  quality: string;
  satellites: number;
}

export interface PointingEntry {
  target: string;
  azimuth_deg: number;
  elevation_deg: number;
  slant_range_m: number;
  azimuth_undefined: boolean;
}

export interface StateSnapshot {
  config: {
    tail_window_s: number;
    loss_threshold_s: number;
    target: string | null;
  };
  own: OwnEntry | null;
  pointing: PointingEntry | null;
  seq: number;
  stations: Record<string, StationEntry>;
  target_lost: boolean;
}

export interface PacketLogEntry {
  seq: number;
  time: number;
  tnc2: string;
  ok: boolean;
  error: string | null;
  source: string;
}
