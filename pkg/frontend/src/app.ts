/** Application shell: login, the review queue, and live progress.
 *
 * The UI never invents state: cards come straight from GET /queue and the
 * progress strip re-reads GET /progress after every accepted submission.
 * Network failures keep the card on screen behind a retry banner, so no
 * typed comment or rating is ever lost silently.
 */

import { ConflictError, RejectedError, ReviewApi, UnauthorizedError } from './api.js';
import { renderCard } from './card.js';
import { Progress, QueueItem, Relevance, ReviewLabel, Validity } from './types.js';

const TOKEN_KEY = 'review-token';

export class App {
  private api: ReviewApi | null = null;

  constructor(
    private root: HTMLElement,
    private makeApi: (token: string) => ReviewApi = (token) => new ReviewApi('', token),
  ) {}

  async start(): Promise<void> {
    const token = sessionStorage.getItem(TOKEN_KEY);
    if (!token) {
      this.renderLogin();
      return;
    }
    this.api = this.makeApi(token);
    await this.refresh();
  }

  // --- views -----------------------------------------------------------

  private renderLogin(message?: string): void {
    this.root.innerHTML = '';
    const box = document.createElement('div');
    box.className = 'login';
    box.innerHTML = `
      <h1>QA review</h1>
      <p>Enter your reviewer token to load your queue.</p>
      <input type="password" class="token-input" placeholder="reviewer token" />
      <button class="btn-login">Sign in</button>
      ${message ? `<p class="login-error">${message}</p>` : ''}
    `;
    const input = box.querySelector<HTMLInputElement>('.token-input')!;
    const button = box.querySelector<HTMLButtonElement>('.btn-login')!;
    const submit = () => {
      const token = input.value.trim();
      if (!token) return;
      sessionStorage.setItem(TOKEN_KEY, token);
      this.api = this.makeApi(token);
      void this.refresh();
    };
    button.addEventListener('click', submit);
    input.addEventListener('keydown', (e) => {
      if (e.key === 'Enter') submit();
    });
    this.root.appendChild(box);
  }

  async refresh(): Promise<void> {
    if (!this.api) return;
    try {
      const [queue, progress] = await Promise.all([
        this.api.fetchQueue(),
        this.api.fetchProgress(),
      ]);
      this.renderQueue(queue.reviewer, queue.items, progress);
    } catch (err) {
      if (err instanceof UnauthorizedError) {
        sessionStorage.removeItem(TOKEN_KEY);
        this.api = null;
        this.renderLogin('That token was not recognized.');
        return;
      }
      this.showBanner(`Could not reach the review service: ${String(err)}`, () => this.refresh());
    }
  }

  private renderQueue(reviewer: string, items: QueueItem[], progress: Progress): void {
    this.root.innerHTML = '';

    const header = document.createElement('header');
    header.className = 'topbar';
    header.innerHTML = `
      <span class="who">Reviewer: <strong>${reviewer}</strong></span>
      <span class="progress"></span>
      <button class="btn-logout">Sign out</button>
    `;
    header.querySelector('.btn-logout')!.addEventListener('click', () => {
      sessionStorage.removeItem(TOKEN_KEY);
      this.api = null;
      this.renderLogin();
    });
    this.root.appendChild(header);
    this.updateProgress(progress);

    const list = document.createElement('main');
    list.className = 'queue';
    this.root.appendChild(list);

    if (items.length === 0) {
      const done = document.createElement('div');
      done.className = 'all-done';
      done.textContent = 'All caught up - no pending assignments.';
      list.appendChild(done);
      return;
    }

    for (const item of items) {
      list.appendChild(
        renderCard(item, {
          onReview: (it, label, comment) => this.handleReview(it, label, comment),
          onPilot: (it, relevance, validity) => this.handlePilot(it, relevance, validity),
        }),
      );
    }
  }

  private updateProgress(progress: Progress): void {
    const slot = this.root.querySelector<HTMLElement>('.progress');
    if (!slot) return;
    const status = progress.qa_status;
    const reviewed = progress.submitted_assignments;
    slot.textContent =
      `${reviewed} reviews submitted | pending ${progress.pending_assignments}` +
      ` | Valid ${status['Valid'] ?? 0} | Flawed ${status['Flawed'] ?? 0}` +
      ` | in review ${status['UnderReview'] ?? 0}`;
    slot.dataset.submitted = String(reviewed);
  }

  // --- submissions ---------------------------------------------------------

  private removeCard(item: QueueItem): void {
    this.root
      .querySelector(`[data-assignment-id="${item.assignment_id}"]`)
      ?.remove();
    const queue = this.root.querySelector('.queue');
    if (queue && queue.children.length === 0) {
      const done = document.createElement('div');
      done.className = 'all-done';
      done.textContent = 'All caught up - no pending assignments.';
      queue.appendChild(done);
    }
  }

  private async afterAccepted(item: QueueItem): Promise<void> {
    this.removeCard(item);
    if (!this.api) return;
    try {
      this.updateProgress(await this.api.fetchProgress());
    } catch {
      /* the submission itself succeeded; the strip catches up next refresh */
    }
  }

  private async handleReview(item: QueueItem, label: ReviewLabel, comment: string): Promise<void> {
    if (!this.api) return;
    try {
      await this.api.submitReview(item.assignment_id, label, comment || undefined);
      await this.afterAccepted(item);
    } catch (err) {
      this.handleSubmitError(item, err);
    }
  }

  private async handlePilot(
    item: QueueItem,
    relevance: Relevance,
    validity: Validity,
  ): Promise<void> {
    if (!this.api) return;
    try {
      await this.api.submitPilot(item.qa_id, relevance, validity);
      await this.afterAccepted(item);
    } catch (err) {
      this.handleSubmitError(item, err);
    }
  }

  private handleSubmitError(item: QueueItem, err: unknown): void {
    if (err instanceof ConflictError) {
      // someone (or a double click that slipped through a reload) got here
      // first; the queue on the server is the truth, so re-pull it
      void this.refresh();
      return;
    }
    if (err instanceof UnauthorizedError) {
      sessionStorage.removeItem(TOKEN_KEY);
      this.api = null;
      this.renderLogin('Session expired; sign in again.');
      return;
    }
    if (err instanceof RejectedError) {
      const card = this.root.querySelector(`[data-assignment-id="${item.assignment_id}"]`);
      if (card) {
        let box = card.querySelector<HTMLElement>('.card-error');
        if (!box) {
          box = document.createElement('div');
          box.className = 'card-error';
          card.appendChild(box);
        }
        box.textContent = err.detail;
      }
      return;
    }
    // network trouble: keep the card (and whatever was typed) and offer retry
    this.showBanner('Submission failed to send; check the connection and retry.', () =>
      this.refresh(),
    );
  }

  private showBanner(message: string, retry: () => Promise<void> | void): void {
    this.root.querySelector('.retry-banner')?.remove();
    const banner = document.createElement('div');
    banner.className = 'retry-banner';
    const text = document.createElement('span');
    text.textContent = message;
    const button = document.createElement('button');
    button.textContent = 'Retry';
    button.addEventListener('click', () => {
      banner.remove();
      void retry();
    });
    banner.append(text, button);
    this.root.prepend(banner);
  }
}

export function boot(): void {
  const root = document.getElementById('app');
  if (root) void new App(root).start();
}

// auto-boot in the browser; tests construct App directly
if (typeof document !== 'undefined' && document.getElementById('app')) {
  boot();
}
