/** One review card: the chart, the pair, and the submission controls.
 *
 * Client-side guarantees that mirror the service's rules:
 * - a Flawed label cannot be sent without a comment,
 * - pilot controls can only emit relevance 1..5 and validity -1/0/1,
 * - the submit handlers run at most once per card (double clicks are
 *   swallowed by an in-flight guard that disables the controls).
 */

import {
  QueueItem,
  Relevance,
  RELEVANCE_VALUES,
  ReviewLabel,
  Validity,
  VALIDITY_VALUES,
} from './types.js';

export interface CardHandlers {
  onReview: (item: QueueItem, label: ReviewLabel, comment: string) => Promise<void>;
  onPilot: (item: QueueItem, relevance: Relevance, validity: Validity) => Promise<void>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function showCardError(card: HTMLElement, message: string): void {
  let box = card.querySelector<HTMLElement>('.card-error');
  if (!box) {
    box = el('div', 'card-error');
    card.appendChild(box);
  }
  box.textContent = message;
}

function clearCardError(card: HTMLElement): void {
  card.querySelector('.card-error')?.remove();
}

function setBusy(card: HTMLElement, busy: boolean): void {
  card.classList.toggle('busy', busy);
  card.querySelectorAll<HTMLButtonElement | HTMLSelectElement | HTMLInputElement>(
    'button, select, input, textarea',
  ).forEach((control) => {
    control.disabled = busy;
  });
}

function validationControls(
  card: HTMLElement,
  item: QueueItem,
  handlers: CardHandlers,
): HTMLElement {
  const controls = el('div', 'controls');
  const comment = el('textarea', 'comment');
  comment.placeholder = 'Comment (required when labeling Flawed: state the correction)';

  let inFlight = false;
  const submit = async (label: ReviewLabel) => {
    if (inFlight) return;
    clearCardError(card);
    const text = comment.value.trim();
    if (label === 'Flawed' && !text) {
      showCardError(card, 'A Flawed label needs a comment describing the problem.');
      return;
    }
    inFlight = true;
    setBusy(card, true);
    try {
      await handlers.onReview(item, label, text);
    } finally {
      inFlight = false;
      setBusy(card, false);
    }
  };

  const validBtn = el('button', 'btn-valid', 'Valid');
  validBtn.addEventListener('click', () => void submit('Valid'));
  const flawedBtn = el('button', 'btn-flawed', 'Flawed');
  flawedBtn.addEventListener('click', () => void submit('Flawed'));

  controls.append(comment, validBtn, flawedBtn);
  return controls;
}

function pilotControls(card: HTMLElement, item: QueueItem, handlers: CardHandlers): HTMLElement {
  const controls = el('div', 'controls pilot');

  const relevanceLabel = el('label', 'field', 'Domain relevance (1-5)');
  const relevance = el('select', 'relevance');
  for (const value of RELEVANCE_VALUES) {
    const opt = el('option', undefined, String(value));
    opt.value = String(value);
    relevance.appendChild(opt);
  }
  relevance.value = '3';
  relevanceLabel.appendChild(relevance);

  const validityLabel = el('fieldset', 'field validity');
  validityLabel.appendChild(el('legend', undefined, 'Validity'));
  const captions: Record<Validity, string> = { [-1]: 'incorrect', 0: 'cannot determine', 1: 'correct' };
  for (const value of VALIDITY_VALUES) {
    const wrap = el('label', 'radio');
    const radio = el('input');
    radio.type = 'radio';
    radio.name = `validity-${item.assignment_id}`;
    radio.value = String(value);
    if (value === 1) radio.checked = true;
    wrap.append(radio, document.createTextNode(` ${value} (${captions[value]})`));
    validityLabel.appendChild(wrap);
  }

  let inFlight = false;
  const submitBtn = el('button', 'btn-valid', 'Submit rating');
  submitBtn.addEventListener('click', () => {
    void (async () => {
      if (inFlight) return;
      clearCardError(card);
      const rel = Number(relevance.value);
      const checked = card.querySelector<HTMLInputElement>(
        `input[name="validity-${item.assignment_id}"]:checked`,
      );
      const val = checked ? Number(checked.value) : NaN;
      // the controls only offer legal values; this is the belt to their braces
      if (!RELEVANCE_VALUES.includes(rel as Relevance) || !VALIDITY_VALUES.includes(val as Validity)) {
        showCardError(card, 'Rating out of range.');
        return;
      }
      inFlight = true;
      setBusy(card, true);
      try {
        await handlers.onPilot(item, rel as Relevance, val as Validity);
      } finally {
        inFlight = false;
        setBusy(card, false);
      }
    })();
  });

  controls.append(relevanceLabel, validityLabel, submitBtn);
  return controls;
}

export function renderCard(item: QueueItem, handlers: CardHandlers): HTMLElement {
  const card = el('article', 'card');
  card.dataset.assignmentId = item.assignment_id;

  const img = el('img', 'chart');
  img.src = item.chart_image_url;
  img.alt = `chart for ${item.qa_id}`;
  card.appendChild(img);

  const body = el('div', 'card-body');
  if (item.round > 1) {
    body.appendChild(el('span', 'round-badge', `round ${item.round}`));
  }
  body.appendChild(el('h3', 'question', item.question));
  body.appendChild(el('p', 'answer', item.reference_answer));
  if (item.paper_excerpt) {
    const excerpt = el('details', 'excerpt');
    excerpt.appendChild(el('summary', undefined, 'Paper excerpt'));
    excerpt.appendChild(el('p', undefined, item.paper_excerpt));
    body.appendChild(excerpt);
  }
  card.appendChild(body);

  card.appendChild(
    item.mode === 'pilot'
      ? pilotControls(card, item, handlers)
      : validationControls(card, item, handlers),
  );
  return card;
}
