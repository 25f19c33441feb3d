/** Shareable-view URL hash: encodes camera pose and simulation time. */

import { OrbitCamera, Vec3 } from "./camera.js";

export interface ViewHash {
  target: Vec3;
  distance: number;
  theta: number;
  phi: number;
  t: number;
}

const KEYS = ["tx", "ty", "tz", "d", "th", "ph", "t"] as const;

export function encodeViewHash(v: ViewHash): string {
  const vals = [v.target[0], v.target[1], v.target[2], v.distance, v.theta, v.phi, v.t];
  const parts = KEYS.map((k, i) => `${k}=${vals[i].toPrecision(9)}`);
  return "#" + parts.join("&");
}

export function decodeViewHash(hash: string): ViewHash | null {
  const body = hash.startsWith("#") ? hash.slice(1) : hash;
  if (body === "") {
    return null;
  }
  const got = new Map<string, number>();
  for (const part of body.split("&")) {
    const eq = part.indexOf("=");
    if (eq < 0) {
      return null;
    }
    const val = Number(part.slice(eq + 1));
    if (!Number.isFinite(val)) {
      return null;
    }
    got.set(part.slice(0, eq), val);
  }
  if (!KEYS.every((k) => got.has(k))) {
    return null;
  }
  return {
    target: [got.get("tx")!, got.get("ty")!, got.get("tz")!],
    distance: got.get("d")!,
    theta: got.get("th")!,
    phi: got.get("ph")!,
    t: got.get("t")!,
  };
}

export function viewHashOf(cam: OrbitCamera, t: number): ViewHash {
  return {
    target: [...cam.target] as Vec3,
    distance: cam.distance,
    theta: cam.theta,
    phi: cam.phi,
    t,
  };
}

export function applyViewHash(cam: OrbitCamera, v: ViewHash): void {
  cam.target = [...v.target] as Vec3;
  cam.distance = v.distance;
  cam.theta = v.theta;
  cam.phi = v.phi;
}
