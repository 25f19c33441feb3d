/** Thin typed wrapper over the /api endpoints. Injectable fetch for testing. */

import { Block, DatasetMeta, IndexEntry, ResolveResponse, parseBlock, parseIndex } from "./protocol.js";
import { CameraJson } from "./camera.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly base = "",
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async ok(url: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchFn(this.base + url, init);
    if (!resp.ok) {
      throw new ApiError(resp.status, `${url}: HTTP ${resp.status}`);
    }
    return resp;
  }

  async meta(): Promise<DatasetMeta> {
    return (await this.ok("/api/meta")).json();
  }

  async index(s: number): Promise<IndexEntry[]> {
    return parseIndex(await (await this.ok(`/api/index/${s}`)).arrayBuffer());
  }

  async block(s: number, path: number): Promise<Block> {
    return parseBlock(await (await this.ok(`/api/block/${s}/${path}`)).arrayBuffer());
  }

  async resolve(
    interval: number,
    camera: CameraJson,
    tau: number,
    budget: number,
  ): Promise<ResolveResponse> {
    const resp = await this.ok("/api/resolve", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ interval, camera, tau, budget }),
    });
    return resp.json();
  }

  async registerSelection(ids: number[]): Promise<string> {
    const resp = await this.ok("/api/selection", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ids }),
    });
    return (await resp.json()).token;
  }

  async selectionFlags(token: string, s: number, path: number): Promise<Uint8Array> {
    const resp = await this.ok(`/api/selection/${token}/${s}/${path}`);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
