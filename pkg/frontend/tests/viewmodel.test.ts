import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { ViewModel } from "../src/viewmodel.js";
import type { EventRecord, StateSnapshot } from "../src/types.js";

const LOG_LINES = readFileSync(new URL("../fixtures/ns75-events.ndjson", import.meta.url), "utf-8")
  .split("\n")
  .filter((line) => line.trim().length > 0);

const MID_SNAPSHOT = JSON.parse(
  readFileSync(new URL("../fixtures/ns75-snapshot-mid.json", import.meta.url), "utf-8"),
) as StateSnapshot;

function freshFold(): ViewModel {
  const vm = new ViewModel();
  for (const line of LOG_LINES) {
    vm.applyEventLine(line);
  }
  return vm;
}

describe("view model fold", () => {
  it("is deterministic: same log twice gives identical serialized state", () => {
    const first = freshFold().serialize();
    const second = freshFold().serialize();
    expect(second).toBe(first);
  });

  it("snapshot-then-resume equals a straight fold (no duplicated markers)", () => {
    const straight = freshFold();

    const resumed = new ViewModel();
    resumed.applySnapshot(MID_SNAPSHOT);
    // Replay the stream with overlap: events before the snapshot's seq
    // must be dropped, the rest applied exactly once.
    for (const line of LOG_LINES) {
      resumed.applyEventLine(line);
    }
    // The packet-log pane is a capped recent-traffic ring the snapshot
    // does not carry; every piece of tracking state must match exactly.
    const scrub = (vm: ViewModel) => {
      const state = JSON.parse(vm.serialize()) as Record<string, unknown>;
      delete state["packetLog"];
      return JSON.stringify(state);
    };
    expect(scrub(resumed)).toBe(scrub(straight));
    expect(resumed.seq).toBe(straight.seq);
  });

  it("drops events at or below the current seq", () => {
    const vm = new ViewModel();
    const record = JSON.parse(LOG_LINES[1]) as EventRecord;
    expect(vm.applyEvent(record)).toBe(true);
    expect(vm.applyEvent(record)).toBe(false);
  });

  it("tracks signal lost and reacquired banners for the target", () => {
    const vm = new ViewModel();
    let sawLost = false;
    let sawReacquired = false;
    for (const line of LOG_LINES) {
      const record = JSON.parse(line) as EventRecord;
      vm.applyEvent(record);
      if (record.variant === "signal_lost") {
        sawLost = true;
        expect(vm.targetLost).toBe(true);
      }
      if (record.variant === "signal_reacquired") {
        sawReacquired = true;
        expect(vm.targetLost).toBe(false);
      }
    }
    expect(sawLost && sawReacquired).toBe(true);
  });

  it("keeps packet ages and the log pane bounded", () => {
    const vm = freshFold();
    const age = vm.packetAgeS("W3EAX-12");
    expect(age).not.toBeNull();
    expect(age!).toBeGreaterThanOrEqual(0);
    expect(vm.packetAgeS("NOBODY")).toBeNull();
    expect(vm.packetLog.length).toBeLessThanOrEqual(200);
  });
});

describe("tail geometry", () => {
  it("bridges a reception gap with one straight segment", () => {
    const vm = freshFold();
    const tail = vm.tailPolyline("W3EAX-12", vm.lastEventTime);
    expect(tail.length).toBeGreaterThan(10);

    // The flight contains a long out-of-range gap; the polyline must
    // still be a single connected sequence (points - 1 segments), the
    // gap spanned by exactly one segment, with no break markers.
    const times = tail.map((fix) => fix.time ?? 0);
    const gaps = times.slice(1).map((t, i) => t - times[i]);
    const largest = Math.max(...gaps);
    expect(largest).toBeGreaterThan(1000); // the out-of-range stretch
    const segments = tail.length - 1;
    expect(segments).toBe(times.length - 1);
    // Strictly time-ordered: nothing synthetic inserted into the gap.
    expect([...times].sort((a, b) => a - b)).toEqual(times);
  });

  it("honors the tail window", () => {
    const vm = freshFold();
    const all = vm.tailPolyline("W3EAX-12", vm.lastEventTime);
    vm.tailWindowS = 120;
    const recent = vm.tailPolyline("W3EAX-12", vm.lastEventTime);
    expect(recent.length).toBeLessThan(all.length);
    for (const fix of recent) {
      expect(fix.time!).toBeGreaterThanOrEqual(vm.lastEventTime - 120);
    }
  });

  it("replaceTail swaps fixes after a tail re-query", () => {
    const vm = freshFold();
    vm.replaceTail("W3EAX-12", [{ lat: 1, lon: 2, alt_m: 3, time: 4 }]);
    expect(vm.stations["W3EAX-12"].fixes).toHaveLength(1);
  });
});
