/** Typed client for the review service HTTP API.
 *
 * Every value this client can send is constrained to the service's
 * accepted enums; anything else throws before a request is made.
 */

import {
  Progress,
  QueueResponse,
  Relevance,
  RELEVANCE_VALUES,
  ReviewLabel,
  ReviewReceipt,
  Validity,
  VALIDITY_VALUES,
} from './types.js';

export class UnauthorizedError extends Error {
  constructor() {
    super('reviewer token was rejected');
  }
}

/** The assignment already carries a label (someone submitted first). */
export class ConflictError extends Error {
  constructor() {
    super('assignment already submitted');
  }
}

/** The service refused the payload (e.g. Flawed without a comment). */
export class RejectedError extends Error {
  constructor(public detail: string) {
    super(detail);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  constructor(
    private baseUrl: string,
    private token: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      ...init,
      headers: {
        'X-Review-Token': this.token,
        ...(init?.body ? { 'Content-Type': 'application/json' } : {}),
        ...init?.headers,
      },
    });
    if (resp.status === 401) throw new UnauthorizedError();
    if (resp.status === 409) throw new ConflictError();
    if (resp.status >= 400) {
      let detail = `request failed (${resp.status})`;
      try {
        const body = (await resp.json()) as { detail?: unknown };
        if (typeof body.detail === 'string') detail = body.detail;
      } catch {
        /* non-JSON error body; keep the generic message */
      }
      throw new RejectedError(detail);
    }
    return resp;
  }

  async fetchQueue(): Promise<QueueResponse> {
    const resp = await this.request('/queue');
    return (await resp.json()) as QueueResponse;
  }

  async fetchProgress(): Promise<Progress> {
    const resp = await this.request('/progress');
    return (await resp.json()) as Progress;
  }

  async submitReview(
    assignmentId: string,
    label: ReviewLabel,
    comment?: string,
  ): Promise<ReviewReceipt> {
    if (label !== 'Valid' && label !== 'Flawed') {
      throw new RejectedError(`label must be Valid or Flawed, got ${String(label)}`);
    }
    if (label === 'Flawed' && !(comment && comment.trim())) {
      throw new RejectedError('a Flawed label requires a comment');
    }
    const resp = await this.request('/reviews', {
      method: 'POST',
      body: JSON.stringify({ assignment_id: assignmentId, label, comment: comment ?? null }),
    });
    return (await resp.json()) as ReviewReceipt;
  }

  async submitPilot(qaId: string, relevance: Relevance, validity: Validity): Promise<void> {
    if (!RELEVANCE_VALUES.includes(relevance)) {
      throw new RejectedError(`relevance must be 1..5, got ${String(relevance)}`);
    }
    if (!VALIDITY_VALUES.includes(validity)) {
      throw new RejectedError(`validity must be -1, 0 or 1, got ${String(validity)}`);
    }
    await this.request('/pilot', {
      method: 'POST',
      body: JSON.stringify({ qa_id: qaId, relevance, validity }),
    });
  }
}
