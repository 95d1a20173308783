// Browser bootstrap: hash routing, session handling, and API wiring.
// Optimistic UI is disabled throughout — views only update after the API
// confirms a mutation.

import { ApiClient, ApiError } from "./api.js";
import { buildEntryForm, renderEntryForm } from "./form.js";
import { allowedRoutes, canVisit, HOME } from "./router.js";
import { Session, SessionStore } from "./session.js";
import type { CatalogResponse, StudentRecordWire } from "./types.js";
import {
  renderDenied,
  renderEntryPage,
  renderFindings,
  renderLogin,
  renderMinimalPage,
  renderNav,
  renderNetworkError,
  renderPunchPage,
  renderRecordPage,
  renderSearch,
  renderStaffPage,
} from "./views.js";

interface AppState {
  session: Session | null;
  catalog: CatalogResponse | null;
  student: StudentRecordWire | null;
  searchResults: { screening_id: string; student_name: string }[] | null;
  fieldSnapshot: Map<string, string>;
}

const sessions = new SessionStore();
const api = new ApiClient({
  baseUrl: (globalThis as { HMMS_API_BASE?: string }).HMMS_API_BASE ?? "",
});
const state: AppState = {
  session: null,
  catalog: null,
  student: null,
  searchResults: null,
  fieldSnapshot: new Map(),
};

function root(): HTMLElement {
  const el = document.getElementById("app");
  if (!el) throw new Error("missing #app mount point");
  return el;
}

function navigate(route: string): void {
  location.hash = route;
}

function currentRoute(): string {
  const hash = location.hash.replace(/^#/, "");
  if (hash) return hash;
  return state.session ? HOME[state.session.role] : "/login";
}

function banner(message: string): void {
  const el = document.createElement("div");
  el.innerHTML = renderNetworkError(message);
  root().prepend(el.firstElementChild as HTMLElement);
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}

/** Attach an API validation message to its form field, if it names one. */
function showFieldError(error: ApiError): boolean {
  const key = typeof error.details["key"] === "string" ? (error.details["key"] as string) : null;
  if (!key) return false;
  const slot = root().querySelector(`[data-error-for="${key}"]`);
  if (!slot) return false;
  slot.textContent = error.message;
  return true;
}

async function ensureCatalog(): Promise<CatalogResponse> {
  if (!state.catalog) state.catalog = await api.catalog();
  return state.catalog;
}

function entryFormHtml(): string | null {
  if (!state.student || !state.catalog) return null;
  const fields = buildEntryForm(state.catalog.parameters, state.student);
  state.fieldSnapshot = new Map(fields.map((f) => [f.key, f.value]));
  const year = new Date().getFullYear();
  return `<label>Camp year <input name="__camp_year" type="number" value="${year}"></label>\n` +
    renderEntryForm(fields);
}

async function renderRoute(): Promise<void> {
  const route = currentRoute();
  if (!state.session) {
    root().innerHTML = renderLogin();
    return;
  }
  if (route === "/login") {
    navigate(HOME[state.session.role]);
    return;
  }
  if (!canVisit(route, state.session.role)) {
    root().innerHTML = renderNav(state.session, allowedRoutes(state.session.role)) +
      renderDenied(route);
    return;
  }

  const nav = renderNav(state.session, allowedRoutes(state.session.role));
  try {
    if (route === "/admin/staff") {
      const staff = await api.staffList();
      root().innerHTML = nav + renderStaffPage(staff);
    } else if (route === "/nurse/entry") {
      await ensureCatalog();
      root().innerHTML = nav + renderEntryPage(
        renderSearch(state.searchResults), entryFormHtml());
    } else if (route === "/doctor/punch") {
      const page = state.student
        ? renderRecordPage(state.student, {
            printUrl: api.printUrl(state.student.screening_id),
            actOnReferrals: false,
          })
        : renderPunchPage();
      root().innerHTML = nav + page;
    } else if (route === "/me") {
      const view = await api.minimal();
      root().innerHTML = nav + renderMinimalPage(view);
    } else {
      root().innerHTML = nav + renderDenied(route);
    }
  } catch (error) {
    if (error instanceof ApiError && error.status === 401) {
      state.session = null;
      sessions.clear();
      api.token = null;
      root().innerHTML = renderLogin("Session expired, sign in again.");
      return;
    }
    if (error instanceof ApiError && error.status === 403) {
      root().innerHTML = nav + renderDenied(route);
      return;
    }
    root().innerHTML = nav;
    banner(describe(error));
  }
}

function formValues(form: HTMLFormElement): Record<string, string> {
  const out: Record<string, string> = {};
  new FormData(form).forEach((value, key) => {
    out[key] = String(value);
  });
  return out;
}

async function handleLogin(form: HTMLFormElement): Promise<void> {
  const fields = formValues(form);
  try {
    const login = await api.login(fields["username"] ?? "", fields["password"] ?? "");
    const session: Session = {
      token: login.token,
      role: login.role,
      displayName: login.display_name,
      screeningId: login.screening_id,
    };
    sessions.save(session);
    state.session = session;
    api.token = login.token;
    navigate(HOME[session.role]);
    await renderRoute();
  } catch (error) {
    root().innerHTML = renderLogin(
      error instanceof ApiError && error.status === 401
        ? "Wrong username or password."
        : describe(error));
  }
}

async function handleLogout(): Promise<void> {
  try {
    await api.logout();
  } catch {
    // token is being discarded either way
  }
  sessions.clear();
  state.session = null;
  state.student = null;
  state.searchResults = null;
  api.token = null;
  navigate("/login");
  await renderRoute();
}

async function openStudent(screeningId: string): Promise<void> {
  state.student = await api.getRecord(screeningId);
  await renderRoute();
}

/** Save every field the nurse changed; corrections go through PUT. */
async function saveEntryForm(form: HTMLFormElement): Promise<void> {
  if (!state.student) return;
  const sid = state.student.screening_id;
  const campYearRaw = (form.elements.namedItem("__camp_year") as HTMLInputElement | null)?.value;
  const campYear = campYearRaw ? Number(campYearRaw) : new Date().getFullYear();
  const catalog = state.catalog;
  if (!catalog) return;
  const byKey = new Map(catalog.parameters.map((p) => [p.key, p]));

  let current: StudentRecordWire = state.student;
  let saved = 0;
  for (const element of Array.from(form.querySelectorAll<HTMLInputElement>("[data-key]"))) {
    if (element.disabled) continue;
    const key = element.dataset["key"] as string;
    const definition = byKey.get(key);
    if (!definition) continue;
    const value = element.type === "checkbox" ? String(element.checked) : element.value;
    if (value === "" || value === state.fieldSnapshot.get(key)) continue;
    const detailInput = form.querySelector<HTMLInputElement>(`[data-detail-for="${key}"]`);
    const payload = {
      key,
      value,
      camp_year: definition.cardinality === "multiple_time" ? campYear : null,
      detail: detailInput?.value ? detailInput.value : null,
    };
    const existing = current.recent_observations[key];
    const isCorrection = definition.cardinality === "multiple_time"
      && existing !== undefined && existing.camp_year === campYear;
    try {
      current = isCorrection
        ? await api.putValue(sid, payload)
        : await api.postValue(sid, payload);
      state.student = current;
      saved += 1;
    } catch (error) {
      if (error instanceof ApiError && showFieldError(error)) return;
      banner(describe(error));
      return; // leave the form as-is so nothing typed is lost
    }
  }
  if (saved > 0) await renderRoute();
}

async function saveDose(form: HTMLFormElement): Promise<void> {
  if (!state.student) return;
  const fields = formValues(form);
  try {
    state.student = await api.postDose(state.student.screening_id, {
      vaccine_code: fields["vaccine_code"] ?? "",
      dose_number: Number(fields["dose_number"] ?? 0),
      given_on: fields["given_on"] ?? "",
    });
    await renderRoute();
  } catch (error) {
    banner(describe(error));
  }
}

async function runScreening(): Promise<void> {
  if (!state.student) return;
  try {
    const result = await api.screen(state.student.screening_id);
    const slot = document.getElementById("screen-result");
    if (slot) slot.innerHTML = renderFindings(result);
    state.student = await api.getRecord(state.student.screening_id);
  } catch (error) {
    banner(describe(error));
  }
}

async function setReferralStatus(referralId: string, status: string): Promise<void> {
  try {
    await api.patchReferral(referralId, { status });
    if (state.student) state.student = await api.getRecord(state.student.screening_id);
    await renderRoute();
  } catch (error) {
    banner(describe(error));
  }
}

function showTab(tab: string): void {
  for (const section of Array.from(root().querySelectorAll<HTMLElement>(".tab"))) {
    section.style.display = section.dataset["tab"] === tab ? "" : "none";
  }
}

async function handleSubmit(event: SubmitEvent): Promise<void> {
  const form = event.target as HTMLFormElement;
  event.preventDefault();
  if (form.id === "login-form") return handleLogin(form);
  if (form.id === "search-form") {
    state.searchResults = await api.search(formValues(form)["q"] ?? "");
    state.student = null;
    return renderRoute();
  }
  if (form.id === "entry-punch-form" || form.id === "punch-form") {
    try {
      state.student = await api.punch(formValues(form)["rfid_token"] ?? "");
      await renderRoute();
    } catch (error) {
      banner(describe(error));
    }
    return;
  }
  if (form.id === "entry-form") return saveEntryForm(form);
  if (form.id === "dose-form") return saveDose(form);
  if (form.id === "staff-form") {
    const fields = formValues(form);
    try {
      await api.staffCreate({
        username: fields["username"] ?? "",
        display_name: fields["display_name"] ?? "",
        role: (fields["role"] ?? "nurse") as Session["role"],
        password: fields["password"] ?? "",
        screening_id: fields["screening_id"] ? fields["screening_id"] : null,
      });
      await renderRoute();
    } catch (error) {
      banner(describe(error));
    }
  }
}

async function handleClick(event: MouseEvent): Promise<void> {
  const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
  if (!target) return;
  const action = target.dataset["action"];
  if (action === "logout") {
    event.preventDefault();
    await handleLogout();
  } else if (action === "home") {
    event.preventDefault();
    if (state.session) navigate(HOME[state.session.role]);
  } else if (action === "open-student") {
    event.preventDefault();
    await openStudent(target.dataset["screeningId"] as string);
  } else if (action === "run-screening") {
    await runScreening();
  } else if (action === "referral-status") {
    await setReferralStatus(
      target.dataset["referral"] as string,
      target.dataset["status"] as string);
  } else if (action === "show-tab") {
    showTab(target.dataset["tab"] as string);
  } else if (action === "staff-delete") {
    try {
      await api.staffDelete(target.dataset["principalId"] as string);
      await renderRoute();
    } catch (error) {
      banner(describe(error));
    }
  } else if (action === "retry") {
    target.parentElement?.remove();
    await renderRoute();
  }
}

function boot(): void {
  state.session = sessions.load();
  if (state.session) api.token = state.session.token;
  document.addEventListener("submit", (event) => {
    void handleSubmit(event as SubmitEvent);
  });
  document.addEventListener("click", (event) => {
    void handleClick(event as MouseEvent);
  });
  window.addEventListener("hashchange", () => {
    void renderRoute();
  });
  void renderRoute();
}

if (typeof document !== "undefined" && typeof window !== "undefined") {
  boot();
}
