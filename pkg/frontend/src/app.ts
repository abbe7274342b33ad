import { askQuestion } from "./api";
import { formatScore } from "./format";
import { AskResult, ChatTurn, ErrorEnvelope } from "./types";

export interface ChatAppOptions {
  baseUrl?: string;
  fetchImpl?: typeof fetch;
  /** BCP-47 tag; anything Persian/Arabic-script renders right-to-left. */
  language?: string;
}

const RTL_PREFIXES = ["fa", "ar", "he", "ur", "ps"];

export function isRtlLanguage(tag: string): boolean {
  const lower = tag.toLowerCase();
  return RTL_PREFIXES.some((p) => lower === p || lower.startsWith(`${p}-`));
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

export class ChatApp {
  readonly turns: ChatTurn[] = [];

  private readonly root: HTMLElement;
  private readonly baseUrl: string;
  private readonly fetchImpl: typeof fetch;
  private pending = false;
  private draft = "";
  private lastError: { envelope: ErrorEnvelope; retriable: boolean } | null = null;

  private turnsList!: HTMLElement;
  private errorBox!: HTMLElement;
  private input!: HTMLInputElement;
  private submitButton!: HTMLButtonElement;

  constructor(root: HTMLElement, options: ChatAppOptions = {}) {
    this.root = root;
    this.baseUrl = options.baseUrl ?? "";
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
    // direction set once at the root; every child inherits it
    root.dir = isRtlLanguage(options.language ?? "fa") ? "rtl" : "ltr";
    this.render();
  }

  /** Rebuild the DOM from state; turn history survives re-rendering. */
  render(): void {
    this.root.textContent = "";
    const container = el("div", "chat");

    this.turnsList = el("div", "turns");
    for (const turn of this.turns) {
      this.turnsList.appendChild(this.renderTurn(turn));
    }
    container.appendChild(this.turnsList);

    this.errorBox = el("div", "error-box");
    this.errorBox.hidden = this.lastError === null;
    if (this.lastError) {
      this.errorBox.appendChild(
        el("span", "error-code", this.lastError.envelope.code),
      );
      this.errorBox.appendChild(
        el("span", "error-message", ` ${this.lastError.envelope.message}`),
      );
      if (this.lastError.retriable) {
        this.errorBox.appendChild(el("span", "error-retry", " — دوباره تلاش کنید"));
      }
    }
    container.appendChild(this.errorBox);

    const form = el("form", "composer");
    this.input = el("input", "question-input");
    this.input.type = "text";
    this.input.placeholder = "پرسش خود را بنویسید…";
    this.input.value = this.draft;
    this.submitButton = el("button", "submit", "بپرس");
    this.submitButton.type = "submit";
    form.appendChild(this.input);
    form.appendChild(this.submitButton);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });
    this.input.addEventListener("input", () => {
      this.draft = this.input.value;
      this.syncControls();
    });
    container.appendChild(form);

    this.root.appendChild(container);
    this.syncControls();
  }

  private syncControls(): void {
    this.submitButton.disabled = this.pending || this.input.value.trim() === "";
  }

  private renderTurn(turn: ChatTurn): HTMLElement {
    const wrapper = el("div", "turn");
    wrapper.appendChild(el("div", "bubble question", turn.question));

    const answer = el("div", "bubble answer");
    answer.appendChild(el("span", "department-badge", turn.response.department));
    answer.appendChild(el("p", "answer-text", turn.response.answer));

    const sources = el("details", "sources");
    sources.appendChild(el("summary", "sources-summary", "منابع"));
    for (const context of turn.response.contexts) {
      const row = el("div", "source-row");
      row.appendChild(el("span", "source-id", context.chunk_id));
      row.appendChild(el("span", "source-score", formatScore(context.score)));
      row.appendChild(el("p", "source-text", context.text));
      sources.appendChild(row);
    }
    answer.appendChild(sources);
    wrapper.appendChild(answer);
    return wrapper;
  }

  /** Submit the composer's question; one request in flight at a time. */
  async submit(): Promise<AskResult | null> {
    this.draft = this.input.value;
    const question = this.draft.trim();
    if (this.pending || question === "") {
      return null;
    }
    this.pending = true;
    this.syncControls();
    const result = await askQuestion(this.baseUrl, question, this.fetchImpl);
    this.pending = false;
    if (result.ok) {
      this.lastError = null;
      this.turns.push({
        question,
        response: result.response,
        submitted_at: new Date().toISOString(),
      });
      this.draft = "";
    } else {
      // error stays inline; the question is kept in the composer for retry
      this.lastError = { envelope: result.error, retriable: result.retriable };
    }
    this.render();
    return result;
  }
}

export function createChatApp(root: HTMLElement, options: ChatAppOptions = {}): ChatApp {
  return new ChatApp(root, options);
}
