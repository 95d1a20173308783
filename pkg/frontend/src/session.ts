import type { Role } from "./types.js";

export interface Session {
  token: string;
  role: Role;
  displayName: string;
  screeningId: string | null;
}

interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const KEY = "hmms.session";

class MemoryStorage implements StorageLike {
  private items = new Map<string, string>();
  getItem(key: string) { return this.items.get(key) ?? null; }
  setItem(key: string, value: string) { this.items.set(key, value); }
  removeItem(key: string) { this.items.delete(key); }
}

function defaultStorage(): StorageLike {
  try {
    if (typeof localStorage !== "undefined") return localStorage;
  } catch {
    // sandboxed iframes throw on access
  }
  return new MemoryStorage();
}

export class SessionStore {
  private storage: StorageLike;

  constructor(storage?: StorageLike) {
    this.storage = storage ?? defaultStorage();
  }

  load(): Session | null {
    const raw = this.storage.getItem(KEY);
    if (!raw) return null;
    try {
      const parsed = JSON.parse(raw);
      if (typeof parsed.token === "string" && typeof parsed.role === "string") {
        return parsed as Session;
      }
    } catch {
      // fall through to clear
    }
    this.storage.removeItem(KEY);
    return null;
  }

  save(session: Session): void {
    this.storage.setItem(KEY, JSON.stringify(session));
  }

  clear(): void {
    this.storage.removeItem(KEY);
  }
}
