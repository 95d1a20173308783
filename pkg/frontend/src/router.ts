import type { Session } from "./session.js";
import type { Role } from "./types.js";
import { renderDenied } from "./views.js";

/** Which roles may open each route; the API re-authorizes every call anyway. */
export const ROUTE_ROLES: Record<string, Role[]> = {
  "/admin/staff": ["admin"],
  "/nurse/entry": ["nurse"],
  "/doctor/punch": ["doctor"],
  "/me": ["student"],
};

export const HOME: Record<Role, string> = {
  admin: "/admin/staff",
  nurse: "/nurse/entry",
  doctor: "/doctor/punch",
  student: "/me",
};

export function canVisit(route: string, role: Role): boolean {
  const allowed = ROUTE_ROLES[route];
  return allowed !== undefined && allowed.includes(role);
}

export function allowedRoutes(role: Role): string[] {
  return Object.keys(ROUTE_ROLES).filter((route) => canVisit(route, role));
}

/**
 * Role fence in front of every page renderer: the page body supplier runs
 * only when the session's role may open the route, so denied routes never
 * touch (or render) any data.
 */
export function fencedRender(
  route: string,
  session: Session | null,
  body: () => string,
): string {
  if (session === null || !canVisit(route, session.role)) {
    return renderDenied(route);
  }
  return body();
}
