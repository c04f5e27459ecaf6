// Page controller: one consultation per page load, one request in flight at
// a time. All probability and entropy figures render verbatim from payloads.

import { Api, ApiError, type SessionPayload } from "./api.js";
import {
  appendMessage,
  renderDiagnosis,
  renderDistribution,
  renderSparkline,
  renderTrace,
} from "./view.js";

export interface Controller {
  state: {
    sessionId: string;
    status: string;
    inFlight: boolean;
    entropySeries: number[];
  };
  /** resolves when the controller has gone idle after the last action */
  settled(): Promise<void>;
}

export function init(doc: Document, api: Api): Controller {
  const messages = doc.getElementById("messages") as HTMLElement;
  const openingLine = doc.getElementById("opening-line") as HTMLElement;
  const distribution = doc.getElementById("distribution") as HTMLElement;
  const entropyBox = doc.getElementById("entropy") as HTMLElement;
  const diagnosisCard = doc.getElementById("diagnosis-card") as HTMLElement;
  const banner = doc.getElementById("banner") as HTMLElement;
  const bannerText = doc.getElementById("banner-text") as HTMLElement;
  const bannerRetry = doc.getElementById("banner-retry") as HTMLButtonElement;
  const bannerDismiss = doc.getElementById("banner-dismiss") as HTMLButtonElement;
  const form = doc.getElementById("composer") as HTMLFormElement;
  const input = doc.getElementById("composer-input") as HTMLInputElement;
  const label = doc.getElementById("composer-label") as HTMLElement;
  const send = doc.getElementById("composer-send") as HTMLButtonElement;
  const traceLink = doc.getElementById("trace-link") as HTMLAnchorElement;
  const traceView = doc.getElementById("trace-view") as HTMLElement;

  const state: Controller["state"] = {
    sessionId: "",
    status: "opening",
    inFlight: false,
    entropySeries: [],
  };
  let pending: Promise<void> = Promise.resolve();
  let retryAction: (() => void) | null = null;

  function refreshControls(): void {
    const done = state.status === "diagnosed" || state.status === "exhausted";
    input.disabled = state.inFlight || done;
    send.disabled = state.inFlight || done || input.value.trim() === "";
  }

  function showError(message: string, retry: (() => void) | null): void {
    bannerText.textContent = message;
    retryAction = retry;
    bannerRetry.hidden = retry === null;
    banner.hidden = false;
  }

  function hideError(): void {
    banner.hidden = true;
    retryAction = null;
  }

  function applyPayload(payload: SessionPayload): void {
    state.sessionId = payload.session_id;
    state.status = payload.status;
    state.entropySeries.push(payload.entropy);
    renderDistribution(distribution, payload.distribution);
    renderSparkline(entropyBox, state.entropySeries);
    if (payload.question) {
      appendMessage(messages, "assistant", payload.question.text);
    }
    if (payload.diagnosis) {
      renderDiagnosis(diagnosisCard, payload.diagnosis);
      traceLink.hidden = false;
    }
    refreshControls();
    if (!input.disabled) input.focus?.();
  }

  function run(action: () => Promise<void>): void {
    if (state.inFlight) return;
    state.inFlight = true;
    refreshControls();
    pending = action()
      .catch((err) => {
        const message = err instanceof ApiError ? err.message : String(err);
        // a lost race is not retryable: the other request already advanced the turn
        showError(message, err instanceof ApiError && err.status === 409 ? null : () => run(action));
      })
      .finally(() => {
        state.inFlight = false;
        refreshControls();
      });
  }

  function submit(): void {
    const text = input.value.trim();
    if (text === "" || state.inFlight) return;
    if (state.status === "opening") {
      run(async () => {
        const payload = await api.createSession(text);
        hideError();
        openingLine.textContent = `You came in with: ${text}`;
        openingLine.hidden = false;
        label.textContent = "Your answer";
        input.value = "";
        applyPayload(payload);
      });
    } else if (state.status === "active") {
      run(async () => {
        const payload = await api.sendAnswer(state.sessionId, text);
        hideError();
        appendMessage(messages, "patient", text);
        input.value = "";
        applyPayload(payload);
      });
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    submit();
  });
  input.addEventListener("input", refreshControls);
  bannerDismiss.addEventListener("click", hideError);
  bannerRetry.addEventListener("click", () => {
    const action = retryAction;
    hideError();
    action?.();
  });
  traceLink.addEventListener("click", (event) => {
    event.preventDefault();
    if (!state.sessionId) return;
    run(async () => {
      const trace = await api.fetchTrace(state.sessionId);
      hideError();
      renderTrace(traceView, trace);
    });
  });

  refreshControls();
  return {
    state,
    settled: () => pending.then(() => undefined),
  };
}
