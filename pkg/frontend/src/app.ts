// DOM wiring for the two-faced console: a listener player (login,
// stream, LIKE, five rotating ad slots) and an operator view (uploads,
// program builder, schedule, announcements, statistics). Everything
// round-trips through the control API; the only client-side logic is the
// rotation mirror.

import { ApiClient, loadBootstrap } from "./api.js";
import { newImpressions, slotIds, tickSlots } from "./adSlots.js";
import { likeLabel, likeNetworkErrorView, likeResultView, LikeView } from "./likeFlow.js";
import {
  applyPollFailure,
  applyPollSuccess,
  displayTitle,
  initialPollState,
  PollState,
} from "./nowPlaying.js";
import {
  addToProgram,
  buildProgramBody,
  draftProblems,
  emptyDraft,
  move,
  ProgramDraft,
  removeAt,
  splitPanes,
} from "./programBuilder.js";
import { initialRotationState, RotationState } from "./rotation.js";
import { RepeatingTimer } from "./timers.js";
import { AdInfo, BootstrapConfig, ProgramInfo, TrackInfo } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class ConsoleApp {
  private api = new ApiClient("");
  private config: BootstrapConfig = {
    apiBaseUrl: "",
    streamUrl: "",
    pollIntervalMs: 5000,
    rotationIntervalMs: 10000,
  };
  private poll: PollState = initialPollState(5000);
  private rotation: RotationState = initialRotationState();
  private selection: AdInfo[] = [];
  private shownIds: (string | null)[] = [null, null, null, null, null];
  private draft: ProgramDraft = emptyDraft();
  private tracks: TrackInfo[] = [];
  private currentTrackId: string | null = null;
  private pollTimer = new RepeatingTimer(() => this.pollNowPlaying());
  private rotateTimer = new RepeatingTimer(() => this.rotateAds());

  async start(): Promise<void> {
    try {
      this.config = await loadBootstrap();
    } catch {
      // served outside the station: defaults keep the page usable
    }
    this.api = new ApiClient(this.config.apiBaseUrl);
    this.poll = initialPollState(this.config.pollIntervalMs);
    const audio = el<HTMLAudioElement>("player");
    audio.src = this.config.streamUrl;
    el<HTMLButtonElement>("btn-login").onclick = () => void this.login();
    el<HTMLButtonElement>("btn-register").onclick = () => void this.register();
    el<HTMLButtonElement>("btn-like").onclick = () => void this.like();
    el<HTMLButtonElement>("btn-play").onclick = () => void audio.play();
    el<HTMLButtonElement>("btn-stop").onclick = () => audio.pause();
    el<HTMLButtonElement>("btn-create-program").onclick = () => void this.createProgram();
    el<HTMLButtonElement>("btn-announce").onclick = () => void this.announce();
    el<HTMLButtonElement>("btn-refresh-stats").onclick = () => void this.refreshStats();
    this.pollTimer.start(0);
    this.renderLike({ kind: "idle" });
  }

  // --- auth ----------------------------------------------------------------

  private credentials(): { login: string; secret: string } {
    return {
      login: el<HTMLInputElement>("login").value.trim(),
      secret: el<HTMLInputElement>("secret").value,
    };
  }

  private async register(): Promise<void> {
    const { login, secret } = this.credentials();
    const reply = await this.api.register(login, secret);
    this.setStatus(
      reply.status === 201 ? `registered ${login}; now log in` : `registration failed (${reply.status})`,
    );
  }

  private async login(): Promise<void> {
    const { login, secret } = this.credentials();
    const reply = await this.api.login(login, secret);
    if (reply.status !== 200) {
      this.setStatus(`login failed (${reply.status})`);
      return;
    }
    this.setStatus(`listening as ${login}`);
    document.body.classList.add("authenticated");
    this.rotateTimer.stop();
    this.rotateTimer.start(0);
    void this.loadOperatorData();
  }

  // --- listener face ---------------------------------------------------------

  private async pollNowPlaying(): Promise<number> {
    try {
      const reply = await this.api.nowPlaying();
      if (reply.status === 200 && reply.body) {
        this.poll = applyPollSuccess(this.poll, reply.body, this.config.pollIntervalMs);
        this.currentTrackId = (reply.body as { track_id?: string }).track_id ?? null;
      } else {
        const { state, effect } = applyPollFailure(
          this.poll, reply.status, this.config.pollIntervalMs,
        );
        this.poll = state;
        if (effect === "redirect-login") this.showLogin();
      }
    } catch {
      this.poll = applyPollFailure(this.poll, null, this.config.pollIntervalMs).state;
    }
    el("now-title").textContent = displayTitle(this.poll);
    el("now-genre").textContent = this.poll.snapshot?.genre ?? "";
    el("stale-badge").hidden = !this.poll.stale;
    return this.poll.nextDelayMs;
  }

  private renderLike(view: LikeView): void {
    const button = el<HTMLButtonElement>("btn-like");
    button.textContent = likeLabel(view);
    button.dataset.state = view.kind;
    button.disabled = view.kind === "pending";
  }

  private async like(): Promise<void> {
    if (!this.api.hasToken) {
      this.renderLike({ kind: "login-required" });
      this.showLogin();
      return;
    }
    if (!this.currentTrackId) {
      this.setStatus("nothing is playing yet");
      return;
    }
    this.renderLike({ kind: "pending" });
    try {
      const reply = await this.api.like(this.currentTrackId);
      const view = likeResultView(reply.status, reply.body);
      this.renderLike(view);
      if (view.kind === "login-required") this.showLogin();
    } catch (error) {
      this.renderLike(likeNetworkErrorView(error));
    }
  }

  private async rotateAds(): Promise<number> {
    if (this.api.hasToken) {
      const reply = await this.api.ads();
      if (reply.status === 200 && reply.body) {
        if (JSON.stringify(reply.body.ads) !== JSON.stringify(this.selection)) {
          this.selection = reply.body.ads;
          this.rotation = initialRotationState();
        }
      }
    }
    const slots = tickSlots(this.selection, this.rotation);
    const ids = slotIds(slots);
    for (const adId of newImpressions(this.shownIds, ids)) {
      void this.api.reportImpression(adId);
    }
    this.shownIds = ids;
    const container = el("ad-slots");
    container.replaceChildren(
      ...slots.map(({ slot, ad }) => {
        const cell = document.createElement("a");
        cell.className = "ad-slot";
        cell.dataset.slot = String(slot);
        if (ad) {
          cell.href = ad.click_url;
          cell.target = "_blank";
          const img = document.createElement("img");
          img.src = ad.creative_url;
          img.alt = ad.target_genre;
          img.onerror = () => cell.replaceChildren(placeholder());
          cell.append(img);
        } else {
          cell.append(placeholder());
        }
        return cell;
      }),
    );
    return this.config.rotationIntervalMs;
  }

  // --- operator face ---------------------------------------------------------

  private async loadOperatorData(): Promise<void> {
    const programs = await this.api.programs();
    if (programs.status === 200 && programs.body) {
      this.renderPrograms(programs.body.programs);
    }
    await this.refreshStats();
  }

  private renderPrograms(programs: ProgramInfo[]): void {
    const list = el("program-list");
    list.replaceChildren(
      ...programs.map((program) => {
        const row = document.createElement("li");
        row.textContent =
          `${program.title || program.id} — ${program.requested_start} [${program.state}] `;
        if (program.state === "pending") {
          const cancel = document.createElement("button");
          cancel.textContent = "cancel";
          cancel.onclick = async () => {
            await this.api.cancelProgram(program.id);
            void this.loadOperatorData();
          };
          row.append(cancel);
        }
        return row;
      }),
    );
  }

  private renderDraft(): void {
    const { library, announcements } = splitPanes(this.tracks);
    const byId = new Map(this.tracks.map((t) => [t.id, t]));
    const pane = (host: HTMLElement, items: TrackInfo[]) => {
      host.replaceChildren(
        ...items.map((track) => {
          const row = document.createElement("li");
          row.textContent = `${track.artist} - ${track.title} `;
          const add = document.createElement("button");
          add.textContent = "add";
          add.onclick = () => {
            this.draft = addToProgram(this.draft, track.id);
            this.renderDraft();
          };
          row.append(add);
          return row;
        }),
      );
    };
    pane(el("pane-library"), library);
    pane(el("pane-announcements"), announcements);
    const chosen = el("pane-program");
    chosen.replaceChildren(
      ...this.draft.selected.map((id, index) => {
        const row = document.createElement("li");
        row.textContent = `${index + 1}. ${byId.get(id)?.title ?? id} `;
        for (const [label, action] of [
          ["↑", () => (this.draft = move(this.draft, index, -1))],
          ["↓", () => (this.draft = move(this.draft, index, 1))],
          ["✕", () => (this.draft = removeAt(this.draft, index))],
        ] as const) {
          const button = document.createElement("button");
          button.textContent = label;
          button.onclick = () => {
            action();
            this.renderDraft();
          };
          row.append(button);
        }
        return row;
      }),
    );
  }

  private async createProgram(): Promise<void> {
    this.draft = {
      ...this.draft,
      title: el<HTMLInputElement>("program-title").value,
      description: el<HTMLInputElement>("program-description").value,
      startIso: el<HTMLInputElement>("program-start").value,
    };
    const problems = draftProblems(this.draft);
    if (problems.length > 0) {
      this.setStatus(problems.join("; "));
      return;
    }
    const reply = await this.api.createProgram(buildProgramBody(this.draft));
    if (reply.status === 201) {
      this.setStatus("program scheduled");
      this.draft = emptyDraft();
      this.renderDraft();
      void this.loadOperatorData();
    } else {
      this.setStatus(`scheduling failed (${reply.status})`);
    }
  }

  private async announce(): Promise<void> {
    const text = el<HTMLTextAreaElement>("announce-text").value;
    const voice = el<HTMLInputElement>("announce-voice").value;
    const reply = await this.api.announce(text, voice);
    this.setStatus(
      reply.status === 201
        ? `announcement added to the library (${reply.body?.duration_s.toFixed(1)} s)`
        : `synthesis failed (${reply.status})`,
    );
  }

  private async refreshStats(): Promise<void> {
    const reply = await this.api.statsCsv();
    if (reply.status === 200 && reply.body !== null) {
      el<HTMLPreElement>("stats-csv").textContent = reply.body;
    }
  }

  // --- chrome -------------------------------------------------------------------

  private showLogin(): void {
    document.body.classList.remove("authenticated");
    this.setStatus("session expired; log in again");
  }

  private setStatus(message: string): void {
    el("status-line").textContent = message;
  }
}

function placeholder(): HTMLElement {
  const div = document.createElement("div");
  div.className = "ad-placeholder";
  div.textContent = "—";
  return div;
}

if (typeof document !== "undefined" && document.getElementById("player")) {
  void new ConsoleApp().start();
}
