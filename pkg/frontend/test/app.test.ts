import { beforeEach, describe, expect, it, vi } from 'vitest';

import { ReviewApi } from '../src/api.js';
import { App } from '../src/app.js';
import { Progress, QueueItem } from '../src/types.js';

function items(n: number): QueueItem[] {
  return Array.from({ length: n }, (_, i) => ({
    assignment_id: `a-${i}`,
    qa_id: `q${i}`,
    chart_image_url: `/charts/c${i}/image`,
    question: `Question ${i}?`,
    reference_answer: `Answer ${i}.`,
    paper_excerpt: '',
    round: 1,
    mode: 'validation' as const,
  }));
}

function progress(submitted: number, pending: number): Progress {
  return {
    qa_status: { UnderReview: pending, Valid: 0, Flawed: 0 },
    pending_assignments: pending,
    submitted_assignments: submitted,
    escalation_queue: 0,
    pilot_ratings: 0,
  };
}

function fakeApi(queue: QueueItem[], state: { submitted: number }) {
  const api = {
    fetchQueue: vi.fn(async () => ({ reviewer: 'r1', items: queue })),
    fetchProgress: vi.fn(async () => progress(state.submitted, queue.length)),
    submitReview: vi.fn(async (assignmentId: string) => {
      const idx = queue.findIndex((q) => q.assignment_id === assignmentId);
      queue.splice(idx, 1);
      state.submitted += 1;
      return { qa_id: 'q', qa_status: 'UnderReview' };
    }),
    submitPilot: vi.fn(async () => undefined),
  };
  return api as unknown as ReviewApi;
}

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  sessionStorage.clear();
});

describe('App', () => {
  it('shows the login view without a stored token', async () => {
    const root = document.getElementById('app')!;
    await new App(root).start();
    expect(root.querySelector('.token-input')).toBeTruthy();
  });

  it('renders one card per pending assignment', async () => {
    sessionStorage.setItem('review-token', 'tok-r1');
    const root = document.getElementById('app')!;
    const api = fakeApi(items(3), { submitted: 0 });
    await new App(root, () => api).start();
    expect(root.querySelectorAll('.card')).toHaveLength(3);
  });

  it('renders the all-caught-up state for an empty queue', async () => {
    sessionStorage.setItem('review-token', 'tok-r1');
    const root = document.getElementById('app')!;
    await new App(root, () => fakeApi([], { submitted: 0 })).start();
    expect(root.querySelector('.all-done')).toBeTruthy();
    expect(root.querySelectorAll('.card')).toHaveLength(0);
  });

  it('a submitted Valid label removes the card and bumps the counter', async () => {
    sessionStorage.setItem('review-token', 'tok-r1');
    const root = document.getElementById('app')!;
    const queue = items(2);
    const api = fakeApi(queue, { submitted: 0 });
    await new App(root, () => api).start();

    expect(root.querySelector<HTMLElement>('.progress')!.dataset.submitted).toBe('0');
    root.querySelector<HTMLButtonElement>('.card .btn-valid')!.click();
    await new Promise((r) => setTimeout(r, 0));

    expect(root.querySelectorAll('.card')).toHaveLength(1);
    expect(root.querySelector<HTMLElement>('.progress')!.dataset.submitted).toBe('1');
  });

  it('keeps the card and shows a retry banner on network failure', async () => {
    sessionStorage.setItem('review-token', 'tok-r1');
    const root = document.getElementById('app')!;
    const queue = items(1);
    const api = fakeApi(queue, { submitted: 0 });
    (api.submitReview as ReturnType<typeof vi.fn>).mockRejectedValue(new TypeError('fetch failed'));
    await new App(root, () => api).start();

    root.querySelector<HTMLButtonElement>('.card .btn-valid')!.click();
    await new Promise((r) => setTimeout(r, 0));

    expect(root.querySelectorAll('.card')).toHaveLength(1); // nothing lost
    expect(root.querySelector('.retry-banner')).toBeTruthy();
  });

  it('falls back to login when the token is rejected', async () => {
    sessionStorage.setItem('review-token', 'bad');
    const root = document.getElementById('app')!;
    const api = fakeApi([], { submitted: 0 });
    const { UnauthorizedError } = await import('../src/api.js');
    (api.fetchQueue as ReturnType<typeof vi.fn>).mockRejectedValue(new UnauthorizedError());
    await new App(root, () => api).start();
    expect(root.querySelector('.token-input')).toBeTruthy();
    expect(sessionStorage.getItem('review-token')).toBeNull();
  });
});
