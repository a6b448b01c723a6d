// Thin fetch client for the station's control API. All state lives on
// the server; the console only relays calls and renders replies.

import {
  AdInfo,
  BootstrapConfig,
  NowPlaying,
  ProgramBody,
  ProgramInfo,
  TrackInfo,
} from "./types.js";

export interface ApiReply<T> {
  status: number;
  body: T | null;
}

export class ApiClient {
  private token: string | null = null;

  constructor(private baseUrl: string = "") {}

  setToken(token: string | null): void {
    this.token = token;
  }

  get hasToken(): boolean {
    return this.token !== null;
  }

  private headers(json = true): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async call<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<ApiReply<T>> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: this.headers(body !== undefined),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let parsed: T | null = null;
    try {
      parsed = (await response.json()) as T;
    } catch {
      parsed = null;
    }
    return { status: response.status, body: parsed };
  }

  register(login: string, secret: string) {
    return this.call<{ user_id: string }>("POST", "/api/register", { login, secret });
  }

  async login(login: string, secret: string): Promise<ApiReply<{ token: string }>> {
    const reply = await this.call<{ token: string }>("POST", "/api/login", {
      login,
      secret,
    });
    if (reply.status === 200 && reply.body) {
      this.token = reply.body.token;
    }
    return reply;
  }

  like(trackId: string) {
    return this.call<{ accepted: boolean }>("POST", "/api/like", { track_id: trackId });
  }

  nowPlaying() {
    return this.call<NowPlaying>("GET", "/api/now-playing");
  }

  ads() {
    return this.call<{ ads: AdInfo[] }>("GET", "/api/ads");
  }

  reportImpression(adId: string) {
    return this.call<{ impressions: number }>(
      "POST",
      `/api/ads/${encodeURIComponent(adId)}/impression`,
    );
  }

  programs() {
    return this.call<{ programs: ProgramInfo[] }>("GET", "/api/programs");
  }

  createProgram(body: ProgramBody) {
    return this.call<ProgramInfo>("POST", "/api/programs", body);
  }

  cancelProgram(id: string) {
    return this.call<{ cancelled: string }>(
      "DELETE",
      `/api/programs/${encodeURIComponent(id)}`,
    );
  }

  announce(text: string, voice: string) {
    return this.call<TrackInfo>("POST", "/api/announce", { text, voice });
  }

  async statsCsv(): Promise<ApiReply<string>> {
    const response = await fetch(this.baseUrl + "/api/stats.csv", {
      headers: this.headers(false),
    });
    return {
      status: response.status,
      body: response.ok ? await response.text() : null,
    };
  }
}

export async function loadBootstrap(baseUrl = ""): Promise<BootstrapConfig> {
  const response = await fetch(baseUrl + "/console/bootstrap.json");
  if (!response.ok) {
    throw new Error(`cannot load console bootstrap: ${response.status}`);
  }
  return (await response.json()) as BootstrapConfig;
}
