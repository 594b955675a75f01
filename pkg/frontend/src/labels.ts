import { ApiError, Client, LabelGuess } from './api';

export type LabelState =
  | { kind: 'idle' }
  | { kind: 'loading' }
  | { kind: 'done'; best: string; chips: string[] }
  | { kind: 'empty' }
  | { kind: 'error'; message: string };

// Photo-to-terms flow: the strongest guess lands in the search field, the
// rest become clickable chips. On failure the field is left alone so a
// term the user already typed survives a bad upload.
export class LabelFlow {
  state: LabelState = { kind: 'idle' };

  constructor(
    private readonly client: Client,
    private readonly prefill: (term: string) => void,
    private readonly onChange: (state: LabelState) => void = () => {},
  ) {}

  private set(state: LabelState): void {
    this.state = state;
    this.onChange(state);
  }

  async submit(image: Blob, filename = 'photo'): Promise<void> {
    this.set({ kind: 'loading' });
    let guesses: LabelGuess[];
    try {
      guesses = await this.client.suggestLabels(image, filename);
    } catch (err) {
      const message = err instanceof ApiError ? err.message : String(err);
      this.set({ kind: 'error', message });
      return;
    }
    if (guesses.length === 0) {
      this.set({ kind: 'empty' });
      return;
    }
    const ordered = [...guesses].sort((a, b) => b.confidence - a.confidence);
    const best = ordered[0]!.term;
    this.prefill(best);
    this.set({ kind: 'done', best, chips: ordered.slice(1).map((g) => g.term) });
  }

  /** Chip click: the chip's term replaces the search field content. */
  pick(term: string): void {
    this.prefill(term);
  }
}
