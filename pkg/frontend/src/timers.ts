// Polling and rotation run on independent, individually cancellable
// timers; the poller honors a per-cycle delay so backoff can stretch it.

export class RepeatingTimer {
  private handle: ReturnType<typeof setTimeout> | null = null;
  private stopped = true;

  constructor(private task: () => Promise<number | void> | number | void) {}

  start(initialDelayMs: number): void {
    this.stopped = false;
    const run = async (delay: number) => {
      if (this.stopped) return;
      this.handle = setTimeout(async () => {
        if (this.stopped) return;
        let next: number | void;
        try {
          next = await this.task();
        } catch {
          next = undefined;
        }
        void run(typeof next === "number" ? next : delay);
      }, delay);
    };
    void run(initialDelayMs);
  }

  stop(): void {
    this.stopped = true;
    if (this.handle !== null) {
      clearTimeout(this.handle);
      this.handle = null;
    }
  }
}
