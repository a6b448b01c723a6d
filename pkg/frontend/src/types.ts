export interface BootstrapConfig {
  apiBaseUrl: string;
  streamUrl: string;
  pollIntervalMs: number;
  rotationIntervalMs: number;
}

export interface NowPlaying {
  title: string;
  artist: string;
  genre: string;
  started: string | null;
  stream_url: string;
}

export interface AdInfo {
  id: string;
  target_genre: string;
  click_url: string;
  creative_url: string;
}

export interface TrackInfo {
  id: string;
  title: string;
  artist: string;
  album: string;
  genre: string;
  language: string;
  duration_s: number;
  bitrate_kbps: number;
}

export interface ProgramInfo {
  id: string;
  requested_start: string;
  items: string[];
  state: "pending" | "playing" | "done" | "cancelled";
  title: string;
  description: string;
  published: boolean;
  completed_at: string | null;
}

export interface ProgramBody {
  items: string[];
  requested_start: string;
  title: string;
  description: string;
  published: boolean;
}
