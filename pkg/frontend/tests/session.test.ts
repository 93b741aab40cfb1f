import { describe, expect, it } from "vitest";

import { Session } from "../src/session.js";
import { squareSetting } from "./helpers.js";

describe("session mode rules", () => {
  it("starts read-only in precomputed mode", () => {
    const session = new Session();
    expect(session.mode).toBe("precomputed");
    expect(session.canEdit).toBe(false);
  });

  it("refuses draft changes outside custom mode", () => {
    const session = new Session();
    expect(() => session.pushDraft(squareSetting())).toThrow(/custom mode/);
  });

  it("draft stack push and undo", () => {
    const session = new Session();
    session.setMode("custom");
    session.resetDraft(squareSetting("v1"));
    session.pushDraft(squareSetting("v2"));
    expect(session.draft!.label).toBe("v2");
    expect(session.undo()).toBe(true);
    expect(session.draft!.label).toBe("v1");
    expect(session.undo()).toBe(false); // keep at least one version
  });

  it("notifies subscribers on every state change", () => {
    const session = new Session();
    let calls = 0;
    const unsubscribe = session.subscribe(() => calls++);
    session.setMode("custom");
    session.setColorScale("cov_diff");
    session.selectSuggestion(2);
    unsubscribe();
    session.setMode("precomputed");
    expect(calls).toBe(3);
  });
});
