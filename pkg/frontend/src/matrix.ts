/**
 * Dashboard rendering: the 3×3 quality matrix, the two marginal
 * histograms, and the CSV export. Everything here formats server-reported
 * numbers verbatim — no statistic is ever computed client-side, so the
 * dashboard cannot disagree with the API.
 */

import { Grade, GRADES, GRADES_ASCENDING, MatrixPayload } from './api.js';

/**
 * Render a fraction as a percentage without floating-point noise
 * (0.62 * 100 is 62.00000000000001 in IEEE 754): scale, round to two
 * decimals, and drop trailing zeros. 0.4 → "40%", 1/3 → "33.33%".
 */
export function formatPercent(fraction: number): string {
  const percent = Math.round(fraction * 10000) / 100;
  return `${percent}%`;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function cell(payload: MatrixPayload, q: Grade, a: Grade): { count: number; fraction: number } {
  return {
    count: payload.joint_counts[q][a],
    fraction: payload.joint_fractions[q][a],
  };
}

/**
 * The joint table as the dashboard shows it: question grades down the
 * side, answer grades across the top, best grades first.
 */
export function matrixTableHtml(payload: MatrixPayload): string {
  const head = GRADES.map((a) => `<th scope="col">A-${a}</th>`).join('');
  const rows = GRADES.map((q) => {
    const cells = GRADES.map((a) => {
      const { count, fraction } = cell(payload, q, a);
      const usable = q === 'High' && a === 'High' ? ' class="usable"' : '';
      return `<td${usable}>${formatPercent(fraction)}<span class="count">${count}</span></td>`;
    }).join('');
    return `<tr><th scope="row">Q-${q}</th>${cells}</tr>`;
  }).join('');
  return `<table class="matrix"><thead><tr><th></th>${head}</tr></thead><tbody>${rows}</tbody></table>`;
}

/** One marginal histogram (question or answer) as labeled bars, best grade first. */
export function histogramHtml(
  histogram: MatrixPayload['question_histogram'],
  label: string,
): string {
  const bars = GRADES.map((grade) => {
    const { count, fraction } = histogram[grade];
    const width = Math.round(fraction * 10000) / 100;
    return (
      `<div class="bar-row"><span class="bar-label">${grade}</span>` +
      `<div class="bar-track"><div class="bar" style="width:${width}%"></div></div>` +
      `<span class="bar-value">${formatPercent(fraction)} (${count})</span></div>`
    );
  }).join('');
  return `<div class="histogram"><h3>${escapeHtml(label)}</h3>${bars}</div>`;
}

export function headlineHtml(payload: MatrixPayload): string {
  return (
    `<div class="headline">` +
    `<span>pairs graded: <strong>${payload.n}</strong></span>` +
    `<span>usable (High/High): <strong>${formatPercent(payload.usable_fraction)}</strong></span>` +
    `<span>unsuitable: <strong>${formatPercent(payload.unsuitable_fraction)}</strong></span>` +
    `</div>`
  );
}

export function dashboardHtml(payload: MatrixPayload | null): string {
  if (payload === null) {
    return '<p class="empty">No annotations yet — the matrix appears after the first submission.</p>';
  }
  return (
    headlineHtml(payload) +
    matrixTableHtml(payload) +
    histogramHtml(payload.question_histogram, 'Question grades') +
    histogramHtml(payload.answer_histogram, 'Answer grades')
  );
}

/**
 * CSV of the joint counts in the same shape the server's own report
 * export uses: header row, then one row per (question, answer) grade pair
 * ascending.
 */
export function matrixCsv(payload: MatrixPayload): string {
  const lines = ['grade_q,grade_a,count'];
  for (const q of GRADES_ASCENDING) {
    for (const a of GRADES_ASCENDING) {
      lines.push(`${q},${a},${payload.joint_counts[q][a]}`);
    }
  }
  return lines.join('\n') + '\n';
}

/** data: link target for the CSV export button/link. */
export function csvDownloadHref(payload: MatrixPayload): string {
  return `data:text/csv;charset=utf-8,${encodeURIComponent(matrixCsv(payload))}`;
}
