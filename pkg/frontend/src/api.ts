import type {
  CatalogResponse,
  LoginResponse,
  MinimalViewWire,
  ReferralWire,
  Role,
  ScreenResponse,
  SearchResult,
  StaffWire,
  StudentRecordWire,
} from "./types.js";

const PREFIX = "/api/v1";

/** A non-2xx API response, carrying the server's error envelope. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly details: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ClientOptions {
  baseUrl?: string;
  fetchFn?: FetchLike;
  token?: string | null;
}

export class ApiClient {
  baseUrl: string;
  token: string | null;
  private fetchFn: FetchLike;

  constructor(options: ClientOptions = {}) {
    this.baseUrl = options.baseUrl ?? "";
    this.token = options.token ?? null;
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchFn(this.baseUrl + PREFIX + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (response.status === 204) return {} as T;
    const text = await response.text();
    let parsed: any = {};
    if (text) {
      try {
        parsed = JSON.parse(text);
      } catch {
        parsed = { raw: text };
      }
    }
    if (!response.ok) {
      const err = parsed?.error ?? {};
      throw new ApiError(
        response.status,
        err.code ?? "http_error",
        err.message ?? `HTTP ${response.status}`,
        err.details ?? {},
      );
    }
    return parsed as T;
  }

  async login(username: string, password: string): Promise<LoginResponse> {
    return this.request<LoginResponse>("POST", "/login", { username, password });
  }

  async logout(): Promise<void> {
    await this.request("POST", "/logout", {});
  }

  async catalog(): Promise<CatalogResponse> {
    return this.request<CatalogResponse>("GET", "/catalog");
  }

  async search(q: string): Promise<SearchResult[]> {
    const body = await this.request<{ results: SearchResult[] }>(
      "GET", `/students?q=${encodeURIComponent(q)}`);
    return body.results;
  }

  async getRecord(screeningId: string): Promise<StudentRecordWire> {
    const body = await this.request<{ record: StudentRecordWire }>(
      "GET", `/students/${encodeURIComponent(screeningId)}`);
    return body.record;
  }

  async register(rfidToken: string, values: Record<string, unknown>): Promise<StudentRecordWire> {
    const body = await this.request<{ record: StudentRecordWire }>(
      "POST", "/students", { rfid_token: rfidToken, values });
    return body.record;
  }

  async postValue(screeningId: string, payload: {
    key: string; value: unknown; camp_year?: number | null; detail?: string | null;
  }): Promise<StudentRecordWire> {
    const body = await this.request<{ record: StudentRecordWire }>(
      "POST", `/students/${encodeURIComponent(screeningId)}/values`, payload);
    return body.record;
  }

  async putValue(screeningId: string, payload: {
    key: string; value: unknown; camp_year?: number | null; detail?: string | null;
  }): Promise<StudentRecordWire> {
    const body = await this.request<{ record: StudentRecordWire }>(
      "PUT", `/students/${encodeURIComponent(screeningId)}/values`, payload);
    return body.record;
  }

  async postDose(screeningId: string, payload: {
    vaccine_code: string; dose_number: number; given_on: string;
  }): Promise<StudentRecordWire> {
    const body = await this.request<{ record: StudentRecordWire }>(
      "POST", `/students/${encodeURIComponent(screeningId)}/doses`, payload);
    return body.record;
  }

  async punch(rfidToken: string): Promise<StudentRecordWire> {
    const body = await this.request<{ record: StudentRecordWire }>(
      "POST", "/punch", { rfid_token: rfidToken });
    return body.record;
  }

  async screen(screeningId: string, asOf?: string): Promise<ScreenResponse> {
    return this.request<ScreenResponse>(
      "POST", `/students/${encodeURIComponent(screeningId)}/screen`,
      asOf ? { as_of: asOf } : {});
  }

  async referrals(screeningId: string): Promise<ReferralWire[]> {
    const body = await this.request<{ referrals: ReferralWire[] }>(
      "GET", `/students/${encodeURIComponent(screeningId)}/referrals`);
    return body.referrals;
  }

  async patchReferral(referralId: string, payload: {
    status?: string; doctor_notes?: string;
  }): Promise<ReferralWire> {
    const body = await this.request<{ referral: ReferralWire }>(
      "PATCH", `/referrals/${encodeURIComponent(referralId)}`, payload);
    return body.referral;
  }

  async minimal(): Promise<MinimalViewWire> {
    const body = await this.request<{ view: MinimalViewWire }>("GET", "/me/minimal");
    return body.view;
  }

  async staffList(): Promise<StaffWire[]> {
    const body = await this.request<{ staff: StaffWire[] }>("GET", "/staff");
    return body.staff;
  }

  async staffCreate(payload: {
    username: string; display_name: string; role: Role;
    password: string; screening_id?: string | null;
  }): Promise<StaffWire> {
    const body = await this.request<{ principal: StaffWire }>("POST", "/staff", payload);
    return body.principal;
  }

  async staffDelete(principalId: string): Promise<void> {
    await this.request("DELETE", `/staff/${encodeURIComponent(principalId)}`);
  }

  /** URL of the server-rendered printable document; opened in a new tab. */
  printUrl(screeningId: string): string {
    return `${this.baseUrl}${PREFIX}/students/${encodeURIComponent(screeningId)}/print`;
  }
}
