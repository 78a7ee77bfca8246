import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export function loadFixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, name), "utf-8")) as T;
}

/** All numeric leaf values of a JSON document, with their key paths. */
export function numericLeaves(value: unknown, path = ""): [string, number][] {
  if (typeof value === "number") {
    return [[path, value]];
  }
  if (Array.isArray(value)) {
    return value.flatMap((item, i) => numericLeaves(item, `${path}[${i}]`));
  }
  if (value !== null && typeof value === "object") {
    return Object.entries(value as Record<string, unknown>).flatMap(([key, item]) =>
      numericLeaves(item, path ? `${path}.${key}` : key),
    );
  }
  return [];
}
