/**
 * Orbit camera: spherical coordinates around a target point, producing the
 * pinhole camera description the resolve endpoint expects.
 */

export type Vec3 = [number, number, number];

export interface CameraJson {
  position: Vec3;
  look_at: Vec3;
  up: Vec3;
  fov_y: number;
  width: number;
  height: number;
  near: number;
}

export function vsub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function vadd(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function vscale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function vlen(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

export function vnorm(a: Vec3): Vec3 {
  const l = vlen(a);
  return l === 0 ? [0, 0, 0] : vscale(a, 1 / l);
}

export function vcross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

const MIN_POLAR = 1e-3;

export class OrbitCamera {
  target: Vec3;
  distance: number;
  /** Azimuth around +Y, radians. */
  theta = 0;
  /** Polar angle from +Y, radians, kept inside (0, pi). */
  phi = Math.PI / 2;
  fovY = 60;
  width = 1024;
  height = 768;
  near = 0.01;

  constructor(target: Vec3, distance: number) {
    this.target = [...target] as Vec3;
    this.distance = distance;
  }

  get position(): Vec3 {
    const sp = Math.sin(this.phi);
    const dir: Vec3 = [
      sp * Math.sin(this.theta),
      Math.cos(this.phi),
      sp * Math.cos(this.theta),
    ];
    return vadd(this.target, vscale(dir, this.distance));
  }

  orbit(dTheta: number, dPhi: number): void {
    this.theta = (this.theta + dTheta) % (2 * Math.PI);
    this.phi = Math.min(Math.max(this.phi + dPhi, MIN_POLAR), Math.PI - MIN_POLAR);
  }

  /** Move the target within the view plane by (dx, dy) pixels. */
  pan(dxPx: number, dyPx: number): void {
    const fwd = vnorm(vsub(this.target, this.position));
    const right = vnorm(vcross(fwd, [0, 1, 0]));
    const up = vcross(right, fwd);
    const worldPerPx =
      (2 * this.distance * Math.tan((this.fovY * Math.PI) / 360)) / this.height;
    this.target = vadd(
      this.target,
      vadd(vscale(right, -dxPx * worldPerPx), vscale(up, dyPx * worldPerPx)),
    );
  }

  /** Exponential zoom; positive steps move closer. */
  dolly(steps: number): void {
    this.distance = Math.max(this.distance * Math.pow(0.9, steps), 10 * this.near);
  }

  toJson(): CameraJson {
    return {
      position: this.position,
      look_at: [...this.target] as Vec3,
      up: [0, 1, 0],
      fov_y: this.fovY,
      width: this.width,
      height: this.height,
      near: this.near,
    };
  }
}

/** Frame an axis-aligned box: camera backed off along +Z far enough to see it all. */
export function frameBox(min: Vec3, max: Vec3, fovY = 60): OrbitCamera {
  const center: Vec3 = [
    0.5 * (min[0] + max[0]),
    0.5 * (min[1] + max[1]),
    0.5 * (min[2] + max[2]),
  ];
  const diag = vlen(vsub(max, min));
  const cam = new OrbitCamera(center, diag / (2 * Math.tan((fovY * Math.PI) / 360)) + diag / 2);
  cam.fovY = fovY;
  return cam;
}
