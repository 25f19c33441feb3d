/**
 * WebGL2 splat renderer. Per point, the vertex stage dequantizes both
 * endpoint positions with the block's box uniforms, blends them with alpha,
 * and sizes a point sprite; the fragment stage applies the radial cubic
 * kernel k(r) = 1 - 3r^2 + 2r^3 and accumulates additively into a float
 * target, which a second pass log tone-maps to the screen. Selected points
 * contribute to a separate channel that tints the output.
 */

import { Block, Box } from "./protocol.js";
import { CameraJson, Vec3, vcross, vnorm, vsub } from "./camera.js";

const QMAX = 65535;
const MIN_RADIUS_PX = 0.5;
const MAX_RADIUS_PX = 64;
const KERNEL_DISK_INTEGRAL = 0.3 * Math.PI;

const SPLAT_VS = `#version 300 es
precision highp float;
in vec3 qposStart;
in vec3 qposEnd;
in float sizeStart;
in float sizeEnd;
in float weightStart;
in float weightEnd;
in float selected;

uniform vec3 boxStartMin, boxStartExtent;
uniform vec3 boxEndMin, boxEndExtent;
uniform float alpha;
uniform vec3 camPos, camRight, camUp, camFwd;
uniform float focalPx;
uniform vec2 viewport;
uniform float near;

out float vAmp;
out float vSelected;

void main() {
  vec3 p0 = boxStartMin + qposStart / ${QMAX}.0 * boxStartExtent;
  vec3 p1 = boxEndMin + qposEnd / ${QMAX}.0 * boxEndExtent;
  vec3 p = mix(p0, p1, alpha);
  float size = mix(sizeStart, sizeEnd, alpha);
  float weight = mix(weightStart, weightEnd, alpha);

  vec3 rel = p - camPos;
  float z = dot(rel, camFwd);
  if (z < near) {
    gl_Position = vec4(0.0, 0.0, -2.0, 1.0);
    gl_PointSize = 0.0;
    vAmp = 0.0;
    vSelected = 0.0;
    return;
  }
  float x = dot(rel, camRight) / z * focalPx;
  float y = dot(rel, camUp) / z * focalPx;
  float radius = clamp(focalPx * size / z, ${MIN_RADIUS_PX}, ${MAX_RADIUS_PX}.0);
  gl_Position = vec4(2.0 * x / viewport.x, 2.0 * y / viewport.y, 0.0, 1.0);
  gl_PointSize = 2.0 * radius;
  vAmp = weight / (${KERNEL_DISK_INTEGRAL} * radius * radius);
  vSelected = selected;
}
`;

const SPLAT_FS = `#version 300 es
precision highp float;
in float vAmp;
in float vSelected;
out vec4 frag;

void main() {
  vec2 d = gl_PointCoord * 2.0 - 1.0;
  float r = length(d);
  if (r >= 1.0) discard;
  float k = 1.0 - 3.0 * r * r + 2.0 * r * r * r;
  float v = vAmp * k;
  frag = vec4(v, v * vSelected, 0.0, 1.0);
}
`;

const TONE_VS = `#version 300 es
void main() {
  vec2 xy = vec2(gl_VertexID == 1 ? 3.0 : -1.0, gl_VertexID == 2 ? 3.0 : -1.0);
  gl_Position = vec4(xy, 0.0, 1.0);
}
`;

const TONE_FS = `#version 300 es
precision highp float;
uniform sampler2D accum;
uniform float invI0;
uniform float invLogMax;
uniform vec3 baseColor;
uniform vec3 highlightColor;
out vec4 frag;

void main() {
  vec4 acc = texelFetch(accum, ivec2(gl_FragCoord.xy), 0);
  float total = acc.r;
  float lum = total <= 0.0 ? 0.0 : log(1.0 + total * invI0) * invLogMax;
  float hil = total <= 0.0 ? 0.0 : clamp(acc.g / total, 0.0, 1.0);
  vec3 color = mix(baseColor, highlightColor, hil) * lum;
  frag = vec4(color, 1.0);
}
`;

const WIRE_VS = `#version 300 es
precision highp float;
in vec3 corner;
uniform vec3 boxMin, boxExtent;
uniform vec3 camPos, camRight, camUp, camFwd;
uniform float focalPx;
uniform vec2 viewport;
uniform float near;

void main() {
  vec3 p = boxMin + corner * boxExtent;
  vec3 rel = p - camPos;
  float z = max(dot(rel, camFwd), near);
  float x = dot(rel, camRight) / z * focalPx;
  float y = dot(rel, camUp) / z * focalPx;
  gl_Position = vec4(2.0 * x / viewport.x, 2.0 * y / viewport.y, 0.0, 1.0);
}
`;

const WIRE_FS = `#version 300 es
precision highp float;
out vec4 frag;
void main() { frag = vec4(0.25, 0.6, 0.3, 1.0); }
`;

interface BlockBuffers {
  vao: WebGLVertexArrayObject;
  count: number;
  boxStart: Box;
  boxEnd: Box;
  flagBuf: WebGLBuffer;
}

function compile(gl: WebGL2RenderingContext, type: number, src: string): WebGLShader {
  const sh = gl.createShader(type)!;
  gl.shaderSource(sh, src);
  gl.compileShader(sh);
  if (!gl.getShaderParameter(sh, gl.COMPILE_STATUS)) {
    throw new Error(`shader compile failed: ${gl.getShaderInfoLog(sh)}`);
  }
  return sh;
}

function link(gl: WebGL2RenderingContext, vs: string, fs: string): WebGLProgram {
  const prog = gl.createProgram()!;
  gl.attachShader(prog, compile(gl, gl.VERTEX_SHADER, vs));
  gl.attachShader(prog, compile(gl, gl.FRAGMENT_SHADER, fs));
  gl.linkProgram(prog);
  if (!gl.getProgramParameter(prog, gl.LINK_STATUS)) {
    throw new Error(`program link failed: ${gl.getProgramInfoLog(prog)}`);
  }
  return prog;
}

function boxExtent(box: Box): Vec3 {
  return [box.max[0] - box.min[0], box.max[1] - box.min[1], box.max[2] - box.min[2]];
}

export class SplatRenderer {
  private gl: WebGL2RenderingContext;
  private splatProg: WebGLProgram;
  private toneProg: WebGLProgram;
  private wireProg: WebGLProgram;
  private accumTex: WebGLTexture | null = null;
  private fbo: WebGLFramebuffer;
  private blocks = new Map<string, BlockBuffers>();
  private wireVao: WebGLVertexArrayObject;
  private width = 0;
  private height = 0;
  /** Reference white for the log tone map, as a fraction of peak intensity. */
  toneFloor = 0.01;
  peakIntensity = 1.0;

  constructor(private canvas: HTMLCanvasElement) {
    const gl = canvas.getContext("webgl2", { antialias: false, alpha: false });
    if (gl === null) {
      throw new Error("WebGL2 is required but unavailable");
    }
    if (gl.getExtension("EXT_color_buffer_float") === null) {
      throw new Error("EXT_color_buffer_float is required but unavailable");
    }
    this.gl = gl;
    this.splatProg = link(gl, SPLAT_VS, SPLAT_FS);
    this.toneProg = link(gl, TONE_VS, TONE_FS);
    this.wireProg = link(gl, WIRE_VS, WIRE_FS);
    this.fbo = gl.createFramebuffer()!;
    this.wireVao = this.makeWireVao();
  }

  private makeWireVao(): WebGLVertexArrayObject {
    const gl = this.gl;
    const corners = new Float32Array(
      [0, 1].flatMap((z) => [0, 1].flatMap((y) => [0, 1].map((x) => [x, y, z]))).flat(),
    );
    const edges = new Uint16Array([
      0, 1, 1, 3, 3, 2, 2, 0, 4, 5, 5, 7, 7, 6, 6, 4, 0, 4, 1, 5, 2, 6, 3, 7,
    ]);
    const vao = gl.createVertexArray()!;
    gl.bindVertexArray(vao);
    gl.bindBuffer(gl.ARRAY_BUFFER, gl.createBuffer());
    gl.bufferData(gl.ARRAY_BUFFER, corners, gl.STATIC_DRAW);
    const loc = gl.getAttribLocation(this.wireProg, "corner");
    gl.enableVertexAttribArray(loc);
    gl.vertexAttribPointer(loc, 3, gl.FLOAT, false, 0, 0);
    gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, gl.createBuffer());
    gl.bufferData(gl.ELEMENT_ARRAY_BUFFER, edges, gl.STATIC_DRAW);
    gl.bindVertexArray(null);
    return vao;
  }

  private resize(width: number, height: number): void {
    if (width === this.width && height === this.height) {
      return;
    }
    const gl = this.gl;
    this.width = width;
    this.height = height;
    this.canvas.width = width;
    this.canvas.height = height;
    if (this.accumTex !== null) {
      gl.deleteTexture(this.accumTex);
    }
    this.accumTex = gl.createTexture();
    gl.bindTexture(gl.TEXTURE_2D, this.accumTex);
    gl.texStorage2D(gl.TEXTURE_2D, 1, gl.RGBA32F, width, height);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.NEAREST);
    gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.NEAREST);
    gl.bindFramebuffer(gl.FRAMEBUFFER, this.fbo);
    gl.framebufferTexture2D(gl.FRAMEBUFFER, gl.COLOR_ATTACHMENT0, gl.TEXTURE_2D, this.accumTex, 0);
    gl.bindFramebuffer(gl.FRAMEBUFFER, null);
  }

  /** Upload (or reuse) GPU buffers for a decoded block. */
  ensureBlock(key: string, block: Block): void {
    if (this.blocks.has(key)) {
      return;
    }
    const gl = this.gl;
    const vao = gl.createVertexArray()!;
    gl.bindVertexArray(vao);
    const attr = (name: string, data: ArrayBufferView, size: number, type: number) => {
      const buf = gl.createBuffer()!;
      gl.bindBuffer(gl.ARRAY_BUFFER, buf);
      gl.bufferData(gl.ARRAY_BUFFER, data, gl.STATIC_DRAW);
      const loc = gl.getAttribLocation(this.splatProg, name);
      gl.enableVertexAttribArray(loc);
      gl.vertexAttribPointer(loc, size, type, false, 0, 0);
      return buf;
    };
    attr("qposStart", block.qposStart, 3, gl.UNSIGNED_SHORT);
    attr("qposEnd", block.qposEnd, 3, gl.UNSIGNED_SHORT);
    attr("sizeStart", block.sizeStart, 1, gl.FLOAT);
    attr("sizeEnd", block.sizeEnd, 1, gl.FLOAT);
    attr("weightStart", block.weightStart, 1, gl.FLOAT);
    attr("weightEnd", block.weightEnd, 1, gl.FLOAT);
    const flagBuf = attr("selected", new Uint8Array(block.count), 1, gl.UNSIGNED_BYTE);
    gl.bindVertexArray(null);
    this.blocks.set(key, {
      vao,
      count: block.count,
      boxStart: block.boxStart,
      boxEnd: block.boxEnd,
      flagBuf,
    });
  }

  setFlags(key: string, flags: Uint8Array): void {
    const entry = this.blocks.get(key);
    if (entry === undefined) {
      return;
    }
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, entry.flagBuf);
    gl.bufferData(gl.ARRAY_BUFFER, flags, gl.STATIC_DRAW);
  }

  dropBlock(key: string): void {
    const entry = this.blocks.get(key);
    if (entry !== undefined) {
      this.gl.deleteVertexArray(entry.vao);
      this.blocks.delete(key);
    }
  }

  has(key: string): boolean {
    return this.blocks.has(key);
  }

  draw(camera: CameraJson, keys: string[], alpha: number, wireframes: boolean): void {
    const gl = this.gl;
    this.resize(camera.width, camera.height);
    const fwd = vnorm(vsub(camera.look_at, camera.position));
    const right = vnorm(vcross(fwd, camera.up));
    const up = vcross(right, fwd);
    const focalPx = camera.height / (2 * Math.tan((camera.fov_y * Math.PI) / 360));

    gl.bindFramebuffer(gl.FRAMEBUFFER, this.fbo);
    gl.viewport(0, 0, this.width, this.height);
    gl.disable(gl.DEPTH_TEST);
    gl.enable(gl.BLEND);
    gl.blendFunc(gl.ONE, gl.ONE);
    gl.clearColor(0, 0, 0, 0);
    gl.clear(gl.COLOR_BUFFER_BIT);

    gl.useProgram(this.splatProg);
    const u = (name: string) => gl.getUniformLocation(this.splatProg, name);
    gl.uniform3fv(u("camPos"), camera.position);
    gl.uniform3fv(u("camRight"), right);
    gl.uniform3fv(u("camUp"), up);
    gl.uniform3fv(u("camFwd"), fwd);
    gl.uniform1f(u("focalPx"), focalPx);
    gl.uniform2f(u("viewport"), this.width, this.height);
    gl.uniform1f(u("near"), camera.near);
    gl.uniform1f(u("alpha"), alpha);
    for (const key of keys) {
      const entry = this.blocks.get(key);
      if (entry === undefined) {
        continue;
      }
      gl.uniform3fv(u("boxStartMin"), entry.boxStart.min);
      gl.uniform3fv(u("boxStartExtent"), boxExtent(entry.boxStart));
      gl.uniform3fv(u("boxEndMin"), entry.boxEnd.min);
      gl.uniform3fv(u("boxEndExtent"), boxExtent(entry.boxEnd));
      gl.bindVertexArray(entry.vao);
      gl.drawArrays(gl.POINTS, 0, entry.count);
    }
    gl.bindVertexArray(null);
    gl.bindFramebuffer(gl.FRAMEBUFFER, null);

    // Tone-map pass to the default framebuffer.
    gl.viewport(0, 0, this.width, this.height);
    gl.disable(gl.BLEND);
    gl.useProgram(this.toneProg);
    gl.activeTexture(gl.TEXTURE0);
    gl.bindTexture(gl.TEXTURE_2D, this.accumTex);
    const tu = (name: string) => gl.getUniformLocation(this.toneProg, name);
    const i0 = this.toneFloor * this.peakIntensity;
    gl.uniform1i(tu("accum"), 0);
    gl.uniform1f(tu("invI0"), i0 > 0 ? 1 / i0 : 0);
    gl.uniform1f(tu("invLogMax"), i0 > 0 ? 1 / Math.log(1 + this.peakIntensity / i0) : 0);
    gl.uniform3f(tu("baseColor"), 0.9, 0.95, 1.0);
    gl.uniform3f(tu("highlightColor"), 1.0, 0.35, 0.1);
    gl.drawArrays(gl.TRIANGLES, 0, 3);

    if (wireframes) {
      gl.useProgram(this.wireProg);
      const wu = (name: string) => gl.getUniformLocation(this.wireProg, name);
      gl.uniform3fv(wu("camPos"), camera.position);
      gl.uniform3fv(wu("camRight"), right);
      gl.uniform3fv(wu("camUp"), up);
      gl.uniform3fv(wu("camFwd"), fwd);
      gl.uniform1f(wu("focalPx"), focalPx);
      gl.uniform2f(wu("viewport"), this.width, this.height);
      gl.uniform1f(wu("near"), camera.near);
      gl.bindVertexArray(this.wireVao);
      for (const key of keys) {
        const entry = this.blocks.get(key);
        if (entry === undefined) {
          continue;
        }
        gl.uniform3fv(wu("boxMin"), entry.boxStart.min);
        gl.uniform3fv(wu("boxExtent"), boxExtent(entry.boxStart));
        gl.drawElements(gl.LINES, 24, gl.UNSIGNED_SHORT, 0);
      }
      gl.bindVertexArray(null);
    }
  }

  /** Read back the tone-mapped frame (RGBA8, bottom-up rows). */
  readPixels(): Uint8Array {
    const gl = this.gl;
    const out = new Uint8Array(this.width * this.height * 4);
    gl.readPixels(0, 0, this.width, this.height, gl.RGBA, gl.UNSIGNED_BYTE, out);
    return out;
  }

  /** Read back the raw accumulation target (RGBA32F, bottom-up rows). */
  readAccumulation(): Float32Array {
    const gl = this.gl;
    gl.bindFramebuffer(gl.FRAMEBUFFER, this.fbo);
    const out = new Float32Array(this.width * this.height * 4);
    gl.readPixels(0, 0, this.width, this.height, gl.RGBA, gl.FLOAT, out);
    gl.bindFramebuffer(gl.FRAMEBUFFER, null);
    return out;
  }
}
