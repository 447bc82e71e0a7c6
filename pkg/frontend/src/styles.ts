/**
 * Markup-name to style-class table.  Data, not code: hosts may replace
 * or extend it without touching the renderer.  Names absent from the
 * table render with the neutral debug style.
 */

export interface StyleTable {
  [markupName: string]: string;
}

export const DEFAULT_STYLES: StyleTable = {
  keyword: "pide-keyword",
  ident: "pide-ident",
  literal: "pide-literal",
  operator: "pide-operator",
  delimiter: "pide-delimiter",
  string: "pide-string",
  bad: "pide-error",
  free: "pide-free-variable",
  entity: "pide-entity-link",
  warning: "pide-warning",
  error: "pide-error",
};

export const DEBUG_STYLE = "pide-debug";

export function styleOf(table: StyleTable, markupName: string): string {
  return table[markupName] ?? DEBUG_STYLE;
}
