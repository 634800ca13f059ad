/**
 * Label algebra mirror for the workbench.
 *
 * The three axes, fused identifier strings, and the span-shape rule that
 * derives the positional axis.  Everything else label-related stays on the
 * service side: the workbench only assembles identifiers the annotator
 * chose and derives Begin/Inside/End from the selection shape.
 */

export type Bie = "Begin" | "Inside" | "End";
export type Fml = "First" | "Middle" | "Last";
export type Fi = "Full" | "Initial";

export const FML_VALUES: readonly Fml[] = ["First", "Middle", "Last"];
export const FI_VALUES: readonly Fi[] = ["Full", "Initial"];

export interface TokenForm {
  fml: Fml;
  fi: Fi;
}

/** Positional axis for each token of a span: single tokens take Begin. */
export function bieForSpan(length: number): Bie[] {
  if (length < 1) throw new Error("span must cover at least one token");
  if (length === 1) return ["Begin"];
  const middle: Bie[] = Array(length - 2).fill("Inside");
  return ["Begin", ...middle, "End"];
}

export function fuseLabel(bie: Bie, form: TokenForm): string {
  return `${bie}_${form.fml}_${form.fi}`;
}

export function labelsForSpan(forms: TokenForm[]): string[] {
  return bieForSpan(forms.length).map((bie, i) => fuseLabel(bie, forms[i]!));
}

const PUNCTUATION = /\p{P}/u;

export interface TokenOffset {
  text: string;
  start: number;
  end: number; // exclusive
}

function isWordChar(ch: string): boolean {
  return !/\s/.test(ch) && !PUNCTUATION.test(ch);
}

/**
 * Offset tokenizer matching the service's rules: punctuation splits off,
 * except hyphen/apostrophe between word characters and the dot of a
 * single-letter uppercase initial.
 */
export function tokenize(text: string): TokenOffset[] {
  const tokens: TokenOffset[] = [];
  let i = 0;
  const n = text.length;
  while (i < n) {
    const ch = text[i]!;
    if (/\s/.test(ch)) {
      i += 1;
      continue;
    }
    if (isWordChar(ch)) {
      const start = i;
      while (i < n) {
        const c = text[i]!;
        if (isWordChar(c)) {
          i += 1;
          continue;
        }
        if (
          (c === "-" || c === "'") &&
          i > start &&
          i + 1 < n &&
          isWordChar(text[i + 1]!)
        ) {
          i += 1;
          continue;
        }
        break;
      }
      const word = text.slice(start, i);
      if (
        i < n &&
        text[i] === "." &&
        word.length === 1 &&
        /[^\W\da-z_]/u.test(word)
      ) {
        i += 1;
        tokens.push({ text: text.slice(start, i), start, end: i });
      } else {
        tokens.push({ text: word, start, end: i });
      }
    } else {
      tokens.push({ text: ch, start: i, end: i + 1 });
      i += 1;
    }
  }
  return tokens;
}

export interface SnappedSelection {
  start: number;
  end: number;
  tokens: TokenOffset[];
}

/**
 * Snap a raw character selection to token boundaries; null when the
 * selection covers no token (zero-length or whitespace only).
 */
export function snapSelection(
  text: string,
  rawStart: number,
  rawEnd: number,
): SnappedSelection | null {
  if (rawEnd <= rawStart) return null;
  const covered = tokenize(text).filter(
    (t) => t.end > rawStart && t.start < rawEnd,
  );
  if (covered.length === 0) return null;
  return {
    start: covered[0]!.start,
    end: covered[covered.length - 1]!.end,
    tokens: covered,
  };
}
