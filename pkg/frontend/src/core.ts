/**
 * Editor core: state, validation, debouncing, request sequencing.
 * Pure logic with injectable fetch so every behavior is testable headlessly.
 */

export interface Meta {
  num_attributes: number;
  attribute_names: string[];
  image_size: number;
  checkpoint_id: string;
  sample_count: number;
}

export interface TransferResult {
  image_b64: string;
  confidence: number[];
  request: unknown;
}

export interface FilmstripFrame {
  theta: number;
  imageB64: string;
  confidence: number[];
}

export const THETA_STEP = 0.05;
export const FILMSTRIP_THETAS = [0, 0.2, 0.4, 0.6, 0.8, 1.0];

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Clamp into [0, 1] and snap onto the slider's 0.05 grid. */
export function snapTheta(value: number): number {
  const clamped = Math.min(1, Math.max(0, value));
  return Math.round(clamped / THETA_STEP) / (1 / THETA_STEP);
}

export function isValidBits(bits: string, n: number): boolean {
  return bits.length === n && [...bits].every((c) => c === "0" || c === "1");
}

export function debounce<A extends unknown[]>(
  ms: number,
  fn: (...args: A) => void,
): { (...args: A): void; cancel(): void } {
  let timer: ReturnType<typeof setTimeout> | undefined;
  const wrapped = (...args: A) => {
    clearTimeout(timer);
    timer = setTimeout(() => fn(...args), ms);
  };
  wrapped.cancel = () => clearTimeout(timer);
  return wrapped;
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = fetch.bind(globalThis),
  ) {}

  async meta(): Promise<Meta> {
    const resp = await this.fetchFn(`${this.baseUrl}/meta`);
    if (!resp.ok) throw new Error(`meta failed: ${resp.status}`);
    return (await resp.json()) as Meta;
  }

  sampleUrl(sampleId: number, bits?: string): string {
    const suffix = bits === undefined ? "" : `?bits=${bits}`;
    return `${this.baseUrl}/sample/${sampleId}${suffix}`;
  }

  async sampleB64(sampleId: number, bits?: string): Promise<string> {
    const resp = await this.fetchFn(this.sampleUrl(sampleId, bits));
    if (!resp.ok) throw new Error(`sample failed: ${resp.status}`);
    const buf = new Uint8Array(await resp.arrayBuffer());
    let binary = "";
    buf.forEach((b) => (binary += String.fromCharCode(b)));
    return btoa(binary);
  }

  async transfer(body: {
    sample_id?: number;
    image_b64?: string;
    target_bits: string;
    theta: number;
  }): Promise<TransferResult> {
    const resp = await this.fetchFn(`${this.baseUrl}/transfer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw new Error(`transfer failed: ${resp.status}`);
    return (await resp.json()) as TransferResult;
  }
}

export interface EditorState {
  meta: Meta | null;
  sampleId: number;
  inlineSource: string | null; // base64 PNG overriding sampleId when set
  bits: number[];
  theta: number;
  imageB64: string | null;
  confidence: number[] | null;
  inFlight: boolean;
  error: string | null;
}

export class Editor {
  readonly state: EditorState = {
    meta: null,
    sampleId: 0,
    inlineSource: null,
    bits: [],
    theta: 1.0, // full transfer, the training-time intensity
    imageB64: null,
    confidence: null,
    inFlight: false,
    error: null,
  };

  private seq = 0;
  private applied = 0;
  private pending = false;
  private scheduled: { (): void; cancel(): void };

  constructor(
    private client: ApiClient,
    private onChange: (state: EditorState) => void = () => {},
    debounceMs = 150,
  ) {
    this.scheduled = debounce(debounceMs, () => void this.requestNow());
  }

  private emit(): void {
    this.onChange(this.state);
  }

  async init(): Promise<void> {
    try {
      this.state.meta = await this.client.meta();
      this.state.bits = new Array(this.state.meta.num_attributes).fill(0);
      this.state.error = null;
    } catch (err) {
      this.state.error = `service unavailable: ${String(err)}`;
    }
    this.emit();
  }

  get controlsEnabled(): boolean {
    return this.state.meta !== null && this.state.error === null;
  }

  get targetBits(): string {
    return this.state.bits.join("");
  }

  toggleBit(index: number): void {
    if (!this.controlsEnabled) return;
    if (index < 0 || index >= this.state.bits.length) {
      throw new RangeError(`attribute index ${index} out of range`);
    }
    this.state.bits[index] = this.state.bits[index] ? 0 : 1;
    this.emit();
    this.scheduled();
  }

  setTheta(raw: number): void {
    if (!this.controlsEnabled) return;
    this.state.theta = snapTheta(raw);
    this.emit();
    this.scheduled();
  }

  selectSample(sampleId: number): void {
    if (!this.controlsEnabled) return;
    this.state.sampleId = sampleId;
    this.state.inlineSource = null;
    this.emit();
    this.scheduled();
  }

  setInlineSource(imageB64: string): void {
    this.state.inlineSource = imageB64;
    this.emit();
  }

  private requestBody() {
    const source = this.state.inlineSource !== null
      ? { image_b64: this.state.inlineSource }
      : { sample_id: this.state.sampleId };
    return { ...source, target_bits: this.targetBits, theta: this.state.theta };
  }

  /**
   * Issue one transfer. At most one request is in flight; edits made while
   * waiting coalesce into a single follow-up. Out-of-order responses are
   * discarded via sequence numbers.
   */
  async requestNow(): Promise<void> {
    if (!this.controlsEnabled) return;
    const meta = this.state.meta as Meta;
    if (!isValidBits(this.targetBits, meta.num_attributes)) {
      throw new Error(`invalid target bits ${this.targetBits}`);
    }
    if (this.state.theta < 0 || this.state.theta > 1) {
      throw new Error(`theta ${this.state.theta} outside [0, 1]`);
    }
    if (this.state.inFlight) {
      this.pending = true;
      return;
    }
    const mySeq = ++this.seq;
    this.state.inFlight = true;
    this.emit();
    try {
      const result = await this.client.transfer(this.requestBody());
      if (mySeq > this.applied) {
        this.applied = mySeq;
        this.state.imageB64 = result.image_b64;
        this.state.confidence = result.confidence;
      }
    } catch (err) {
      this.state.error = `transfer failed: ${String(err)}`;
    } finally {
      this.state.inFlight = false;
      this.emit();
      if (this.pending) {
        this.pending = false;
        void this.requestNow();
      }
    }
  }

  /** Fetch the six-value theta sweep for the current source and targets. */
  async filmstrip(): Promise<FilmstripFrame[]> {
    if (!this.controlsEnabled) throw new Error("editor not initialized");
    const frames: FilmstripFrame[] = [];
    for (const theta of FILMSTRIP_THETAS) {
      const body = { ...this.requestBody(), theta };
      const result = await this.client.transfer(body);
      frames.push({ theta, imageB64: result.image_b64, confidence: result.confidence });
    }
    return frames;
  }
}
