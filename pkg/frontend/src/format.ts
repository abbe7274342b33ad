/** Render a similarity score with exactly four decimals; no math, just text. */
export function formatScore(score: number): string {
  return score.toFixed(4);
}
