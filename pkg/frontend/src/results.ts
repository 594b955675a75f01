import { Client, ResultItem } from './api';

export const PAGE_SIZE = 24;

export interface ResultsHandlers {
  onLoad: (item: ResultItem) => void;
  onApplyScale: (item: ResultItem) => void;
  onPage: (offset: number) => void;
}

function scoreLine(item: ResultItem): string {
  if ('avg' in item.score) return `match ${item.score.avg.toFixed(3)}`;
  return `text ${item.score.text_score.toFixed(1)}`;
}

// Plain-DOM results grid: one card per hit, pagination below. Cards load
// the model into the palette; the scale button applies suggested_scale.
export class ResultsGrid {
  private offset = 0;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: Client,
    private readonly handlers: ResultsHandlers,
  ) {}

  clear(message = ''): void {
    this.root.innerHTML = message ? `<p class="empty">${message}</p>` : '';
  }

  render(items: ResultItem[], offset: number): void {
    this.offset = offset;
    this.root.innerHTML = '';
    if (items.length === 0) {
      this.clear('no results');
      return;
    }
    const grid = document.createElement('div');
    grid.className = 'grid';
    for (const item of items) {
      grid.appendChild(this.card(item));
    }
    this.root.appendChild(grid);
    this.root.appendChild(this.pager(items.length));
  }

  private card(item: ResultItem): HTMLElement {
    const card = document.createElement('div');
    card.className = 'card';
    const img = document.createElement('img');
    img.src = this.client.thumbnailUrl(item.id);
    img.alt = item.name;
    img.loading = 'lazy';
    const name = document.createElement('div');
    name.className = 'card-name';
    name.textContent = `${item.rank}. ${item.name}`;
    const score = document.createElement('div');
    score.className = 'card-score';
    score.textContent = scoreLine(item);
    card.append(img, name, score);
    card.addEventListener('click', () => this.handlers.onLoad(item));
    if (item.suggested_scale !== undefined) {
      const btn = document.createElement('button');
      btn.className = 'scale-btn';
      btn.textContent = `print at x${item.suggested_scale.toFixed(2)}`;
      btn.title = 'load and scale to the sketched size';
      btn.addEventListener('click', (ev) => {
        ev.stopPropagation();
        this.handlers.onApplyScale(item);
      });
      card.appendChild(btn);
    }
    return card;
  }

  private pager(count: number): HTMLElement {
    const nav = document.createElement('div');
    nav.className = 'pager';
    const prev = document.createElement('button');
    prev.textContent = 'prev';
    prev.disabled = this.offset === 0;
    prev.addEventListener('click', () =>
      this.handlers.onPage(Math.max(0, this.offset - PAGE_SIZE)),
    );
    const label = document.createElement('span');
    const page = Math.floor(this.offset / PAGE_SIZE) + 1;
    label.textContent = `page ${page}`;
    const next = document.createElement('button');
    next.textContent = 'next';
    next.disabled = count < PAGE_SIZE;
    next.addEventListener('click', () => this.handlers.onPage(this.offset + PAGE_SIZE));
    nav.append(prev, label, next);
    return nav;
  }
}
