/**
 * Single-in-flight request scheduler.
 *
 * At most one predict request runs at a time; gestures arriving meanwhile
 * coalesce to the latest payload, and responses for superseded payloads are
 * dropped so the overlay always reflects the newest prompt stack.
 */

export type Runner<T, R> = (payload: T) => Promise<R>;

export class CoalescingQueue<T, R> {
  private inFlight = false;
  private pending: T | null = null;
  private generation = 0;

  constructor(
    private runner: Runner<T, R>,
    private onResult: (payload: T, result: R) => void,
    private onError: (payload: T, error: unknown) => void = () => {},
  ) {}

  submit(payload: T): void {
    this.generation++;
    if (this.inFlight) {
      this.pending = payload; // coalesce: only the newest waits
      return;
    }
    void this.run(payload, this.generation);
  }

  get busy(): boolean {
    return this.inFlight;
  }

  private async run(payload: T, generation: number): Promise<void> {
    this.inFlight = true;
    try {
      const result = await this.runner(payload);
      if (generation === this.generation) {
        this.onResult(payload, result);
      }
    } catch (error) {
      if (generation === this.generation) {
        this.onError(payload, error);
      }
    } finally {
      this.inFlight = false;
      if (this.pending !== null) {
        const next = this.pending;
        this.pending = null;
        void this.run(next, this.generation);
      }
    }
  }
}
