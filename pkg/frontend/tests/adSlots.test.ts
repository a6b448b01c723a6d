import { describe, expect, it } from "vitest";

import { newImpressions, renderSlots, slotIds, tickSlots } from "../src/adSlots.js";
import { initialRotationState } from "../src/rotation.js";
import { AdInfo } from "../src/types.js";
import { loadFixture } from "./helpers.js";

function ads(n: number): AdInfo[] {
  return Array.from({ length: n }, (_, i) => ({
    id: `ad${i}`,
    target_genre: "Rock",
    click_url: `http://example/${i}`,
    creative_url: `/api/ads/ad${i}/creative`,
  }));
}

interface RotationTraces {
  ticks: number;
  traces: Record<string, number[][]>;
}

describe("ad slots", () => {
  it("renders five stable distinct slots for a selection of five", () => {
    const state = initialRotationState();
    const selection = ads(5);
    for (let tick = 0; tick < 4; tick++) {
      const slots = tickSlots(selection, state);
      expect(slots.map((s) => s.ad?.id)).toEqual(
        ["ad0", "ad1", "ad2", "ad3", "ad4"],
      );
    }
  });

  it("follows the recorded server trace for a selection of seven", () => {
    const frozen = loadFixture<RotationTraces>("rotation_traces.json");
    const state = initialRotationState();
    const selection = ads(7);
    for (const expected of frozen.traces["7"]) {
      const slots = tickSlots(selection, state);
      expect(slots.map((s) => (s.ad ? selection.indexOf(s.ad) : null))).toEqual(
        expected.map((i) => (i < 7 ? i : null)),
      );
    }
  });

  it("renders placeholders for an empty selection without crashing", () => {
    const slots = tickSlots([], initialRotationState());
    expect(slots).toHaveLength(5);
    expect(slots.every((s) => s.ad === null)).toBe(true);
  });

  it("renders placeholders for first-tick out-of-range indices", () => {
    const slots = renderSlots(ads(2), [0, 1, 2, 3, 4]);
    expect(slots[0].ad?.id).toBe("ad0");
    expect(slots[1].ad?.id).toBe("ad1");
    expect(slots[2].ad).toBeNull();
  });

  it("reports one impression per newly shown ad", () => {
    const previous = ["ad0", "ad1", null, null, "ad4"];
    const current = ["ad0", "ad5", "ad6", null, "ad4"];
    expect(newImpressions(previous, current)).toEqual(["ad5", "ad6"]);
  });

  it("slotIds keeps placeholder positions", () => {
    const slots = renderSlots(ads(1), [0, 1, 2, 3, 4]);
    expect(slotIds(slots)).toEqual(["ad0", null, null, null, null]);
  });
});
