// View states for the LIKE button, decided purely from the API reply so
// the accepted/duplicate/logged-out renderings are testable offline.

export type LikeView =
  | { kind: "idle" }
  | { kind: "pending" }
  | { kind: "liked" }
  | { kind: "already-liked" }
  | { kind: "login-required" }
  | { kind: "error"; message: string; retryable: true };

export function likeResultView(status: number, body: unknown): LikeView {
  if (status === 401) {
    return { kind: "login-required" };
  }
  if (status === 200 && typeof body === "object" && body !== null) {
    const accepted = (body as { accepted?: unknown }).accepted;
    if (accepted === true) {
      return { kind: "liked" };
    }
    if (accepted === false) {
      return { kind: "already-liked" };
    }
  }
  return { kind: "error", message: `like failed (${status})`, retryable: true };
}

export function likeNetworkErrorView(error: unknown): LikeView {
  const message = error instanceof Error ? error.message : String(error);
  return { kind: "error", message, retryable: true };
}

export function likeLabel(view: LikeView): string {
  switch (view.kind) {
    case "idle":
      return "LIKE";
    case "pending":
      return "…";
    case "liked":
      return "Liked ✔";
    case "already-liked":
      return "Already liked";
    case "login-required":
      return "Log in to vote";
    case "error":
      return "Retry LIKE";
  }
}
