/** Shared view-model types mirroring the review service API. */

export type ReviewMode = 'validation' | 'pilot';

export type ReviewLabel = 'Valid' | 'Flawed';

/** The only validity values the pilot rubric accepts. */
export const VALIDITY_VALUES = [-1, 0, 1] as const;
export type Validity = (typeof VALIDITY_VALUES)[number];

/** The only relevance values the pilot rubric accepts. */
export const RELEVANCE_VALUES = [1, 2, 3, 4, 5] as const;
export type Relevance = (typeof RELEVANCE_VALUES)[number];

export interface QueueItem {
  assignment_id: string;
  qa_id: string;
  chart_image_url: string;
  question: string;
  reference_answer: string;
  paper_excerpt: string;
  round: number;
  mode: ReviewMode;
}

export interface QueueResponse {
  reviewer: string;
  items: QueueItem[];
}

export interface Progress {
  qa_status: Record<string, number>;
  pending_assignments: number;
  submitted_assignments: number;
  escalation_queue: number;
  pilot_ratings: number;
}

export interface ReviewReceipt {
  qa_id: string;
  qa_status: string;
}
