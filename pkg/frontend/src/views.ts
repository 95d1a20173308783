// String-returning view renderers. Keeping views as plain strings makes the
// role-fencing and flow tests runnable without a browser DOM.

import { esc } from "./html.js";
import type { Session } from "./session.js";
import type {
  FindingWire,
  MinimalViewWire,
  ReferralWire,
  ScreenResponse,
  SearchResult,
  StaffWire,
  StudentRecordWire,
  WireValue,
} from "./types.js";

export function renderLogin(error?: string): string {
  const banner = error ? `<p class="error" role="alert">${esc(error)}</p>` : "";
  return `<section class="login">
<h1>Health records console</h1>
${banner}
<form id="login-form">
  <label>Username <input name="username" autocomplete="username"></label>
  <label>Password <input name="password" type="password" autocomplete="current-password"></label>
  <button type="submit">Sign in</button>
</form>
</section>`;
}

export function renderDenied(route: string): string {
  return `<section class="denied">
<h1>Not available</h1>
<p>Your account is not allowed to open <code>${esc(route)}</code>.</p>
<p><a href="#" data-action="home">Back to your home page</a></p>
</section>`;
}

export function renderNav(session: Session, routes: string[]): string {
  const labels: Record<string, string> = {
    "/admin/staff": "Staff",
    "/nurse/entry": "Data entry",
    "/doctor/punch": "Punch card",
    "/me": "My summary",
  };
  const links = routes
    .map((route) => `<a href="#${esc(route)}">${esc(labels[route] ?? route)}</a>`)
    .join(" ");
  return `<nav>${links} <span class="who">${esc(session.displayName)} (${esc(session.role)})</span> ` +
    `<button data-action="logout">Sign out</button></nav>`;
}

function valueCell(wire: WireValue): string {
  const detail = wire.detail ? ` <em>${esc(wire.detail)}</em>` : "";
  const year = wire.camp_year !== null ? ` <span class="year">[${wire.camp_year}]</span>` : "";
  return `${esc(wire.value)}${detail}${year}`;
}

function observationsTable(values: Record<string, WireValue>): string {
  const rows = Object.entries(values)
    .map(([key, wire]) =>
      `<tr><th>${esc(key)}</th><td>${valueCell(wire)}</td>` +
      `<td class="when">${esc(wire.recorded_at.slice(0, 10))}</td></tr>`)
    .join("\n");
  return `<table><tbody>${rows}</tbody></table>`;
}

function historyTable(history: Record<string, WireValue[]>): string {
  const rows = Object.entries(history)
    .flatMap(([key, entries]) =>
      entries.map((wire) =>
        `<tr><th>${esc(key)}</th><td>${valueCell(wire)}</td>` +
        `<td class="when">${esc(wire.recorded_at.slice(0, 10))}</td></tr>`))
    .join("\n");
  return `<table><tbody>${rows}</tbody></table>`;
}

function referralBlock(referral: ReferralWire, actionable: boolean): string {
  const findings = referral.failed_findings
    .map((f) => `<li>${esc(f.parameter_key)}: ${esc(f.message)} (observed ${esc(f.observed)})</li>`)
    .join("");
  const notes = referral.doctor_notes
    ? `<p class="notes">Notes: ${esc(referral.doctor_notes)}</p>` : "";
  const buttons = actionable && referral.status !== "Closed"
    ? `<span class="referral-actions">` +
      (referral.status === "Open"
        ? `<button data-action="referral-status" data-referral="${esc(referral.referral_id)}" data-status="Seen">Mark seen</button>`
        : "") +
      `<button data-action="referral-status" data-referral="${esc(referral.referral_id)}" data-status="Closed">Close</button>` +
      `</span>`
    : "";
  return `<article class="referral status-${esc(referral.status.toLowerCase())}" data-referral-id="${esc(referral.referral_id)}">
<header>Referral ${esc(referral.referral_id.slice(0, 8))} — <strong>${esc(referral.status)}</strong> ${buttons}</header>
<ul>${findings}</ul>
${notes}
</article>`;
}

export interface RecordPageOptions {
  printUrl: string;
  /** Referral action buttons are only rendered when the role can record them. */
  actOnReferrals: boolean;
}

export function renderRecordPage(record: StudentRecordWire, opts: RecordPageOptions): string {
  const identity = Object.entries(record.one_time_values)
    .map(([key, wire]) => `<tr><th>${esc(key)}</th><td>${valueCell(wire)}</td></tr>`)
    .join("\n");
  const immunization = record.immunization
    ? `<p class="immunization">Immunization: <strong>${esc(record.immunization.overall)}</strong></p>`
    : "";
  const doses = record.doses
    .map((d) => `<li>${esc(d.vaccine_code)} dose ${d.dose_number} on ${esc(d.given_on)}</li>`)
    .join("");
  const referrals = record.referrals
    .map((r) => referralBlock(r, opts.actOnReferrals))
    .join("\n") || "<p>No referrals.</p>";

  const oldSection = record.old_observations !== undefined
    ? `<section class="tab" data-tab="old">
<h2>Old health data</h2>
${historyTable(record.old_observations)}
</section>`
    : "";
  const tabButtons = record.old_observations !== undefined
    ? `<div class="tabs"><button data-action="show-tab" data-tab="recent">Recent</button>` +
      `<button data-action="show-tab" data-tab="old">Old</button></div>`
    : "";

  return `<section class="record" data-screening-id="${esc(record.screening_id)}">
<h1>${esc(record.one_time_values["student_name"]?.value ?? record.screening_id)}</h1>
<p class="ids">Screening ID ${esc(record.screening_id)} · Card ${esc(record.rfid_token)}</p>
<a class="print" href="${esc(opts.printUrl)}" target="_blank" rel="noopener">Print</a>
<h2>Identity</h2>
<table><tbody>${identity}</tbody></table>
${immunization}
${tabButtons}
<section class="tab" data-tab="recent">
<h2>Recent health data</h2>
${observationsTable(record.recent_observations)}
</section>
${oldSection}
<h2>Doses</h2>
<ul>${doses}</ul>
<h2>Referrals</h2>
${referrals}
</section>`;
}

export function renderPunchPage(error?: string): string {
  const banner = error ? `<p class="error" role="alert">${esc(error)}</p>` : "";
  return `<section class="punch">
<h1>Punch card</h1>
${banner}
<form id="punch-form">
  <label>Card token <input name="rfid_token" autofocus></label>
  <button type="submit">Look up</button>
</form>
</section>`;
}

export function renderSearch(results: SearchResult[] | null): string {
  const list = results === null
    ? ""
    : results.length
      ? `<ul class="results">` + results
          .map((r) =>
            `<li><a href="#" data-action="open-student" data-screening-id="${esc(r.screening_id)}">` +
            `${esc(r.student_name)} (${esc(r.screening_id)})</a></li>`)
          .join("") + `</ul>`
      : `<p>No matches.</p>`;
  return `<form id="search-form">
  <label>Find student <input name="q" placeholder="name or screening id"></label>
  <button type="submit">Search</button>
</form>
${list}`;
}

export function renderEntryPage(searchHtml: string, formHtml: string | null): string {
  const form = formHtml !== null
    ? `<form id="entry-form">
${formHtml}
<button type="submit">Save changes</button>
</form>
<form id="dose-form">
  <h2>Record dose</h2>
  <label>Vaccine <input name="vaccine_code"></label>
  <label>Dose # <input name="dose_number" type="number" min="1"></label>
  <label>Given on <input name="given_on" type="date"></label>
  <button type="submit">Add dose</button>
</form>
<button data-action="run-screening">Run screening</button>
<div id="screen-result"></div>`
    : "<p>Search for a student or punch a card to begin.</p>";
  return `<section class="entry">
<h1>Camp data entry</h1>
${searchHtml}
<form id="entry-punch-form">
  <label>or punch card <input name="rfid_token"></label>
  <button type="submit">Look up</button>
</form>
${form}
</section>`;
}

export function renderFindings(result: ScreenResponse): string {
  const rows = result.findings
    .map((f: FindingWire) => {
      const hints = f.disease_hints.length
        ? `<td class="hints">${esc(f.disease_hints.join(", "))}</td>`
        : "<td></td>";
      return `<tr class="verdict-${esc(f.verdict.toLowerCase())}">` +
        `<td>${esc(f.parameter_key)}</td><td>${esc(f.verdict)}</td>` +
        `<td>${esc(f.observed)}</td><td>${esc(f.message)}</td>${hints}</tr>`;
    })
    .join("\n");
  const referral = result.referral
    ? `<p class="referral-banner" role="alert">Referral opened: ` +
      `${result.referral.failed_findings.length} failed check(s) need a doctor.</p>`
    : `<p class="all-clear">No referral needed.</p>`;
  return `${referral}
<table class="findings"><thead>
<tr><th>Parameter</th><th>Verdict</th><th>Observed</th><th>Message</th><th>Hints</th></tr>
</thead><tbody>${rows}</tbody></table>`;
}

export function renderMinimalPage(view: MinimalViewWire): string {
  const notices = view.notices.length
    ? `<ul class="notices">` + view.notices.map((n) => `<li>${esc(n)}</li>`).join("") + `</ul>`
    : `<p>No notices.</p>`;
  const row = (label: string, value: unknown) =>
    value === null || value === undefined || value === ""
      ? ""
      : `<tr><th>${esc(label)}</th><td>${esc(value)}</td></tr>`;
  return `<section class="minimal">
<h1>${esc(view.student_name)}</h1>
<table><tbody>
${row("Screening ID", view.screening_id)}
${row("Class", view.present_class)}
${row("Height (cm)", view.height_cm)}
${row("Weight (kg)", view.weight_kg)}
${row("BMI", view.bmi)}
${row("Immunization", view.immunization)}
</tbody></table>
<h2>Notices</h2>
${notices}
</section>`;
}

export function renderStaffPage(staff: StaffWire[]): string {
  const rows = staff
    .map((p) =>
      `<tr data-principal-id="${esc(p.principal_id)}">` +
      `<td>${esc(p.username)}</td><td>${esc(p.display_name)}</td><td>${esc(p.role)}</td>` +
      `<td>${esc(p.screening_id ?? "")}</td>` +
      `<td><button data-action="staff-delete" data-principal-id="${esc(p.principal_id)}">Remove</button></td></tr>`)
    .join("\n");
  return `<section class="staff">
<h1>Staff accounts</h1>
<table><thead><tr><th>Username</th><th>Name</th><th>Role</th><th>Linked student</th><th></th></tr></thead>
<tbody>${rows}</tbody></table>
<form id="staff-form">
  <h2>New account</h2>
  <label>Username <input name="username"></label>
  <label>Display name <input name="display_name"></label>
  <label>Role <select name="role">
    <option value="admin">admin</option>
    <option value="nurse">nurse</option>
    <option value="doctor">doctor</option>
    <option value="student">student</option>
  </select></label>
  <label>Linked screening id <input name="screening_id" placeholder="students only"></label>
  <label>Password <input name="password" type="password"></label>
  <button type="submit">Create</button>
</form>
</section>`;
}

export function renderNetworkError(message: string): string {
  return `<p class="error network" role="alert">${esc(message)} ` +
    `<button data-action="retry">Retry</button></p>`;
}
