/**
 * Minimal element tree. Views build plain VNode objects so tests can assert
 * on structure without a DOM; `mount` turns a tree into real elements.
 */

export type Handler = (ev: Event) => void;
export type Attrs = Record<string, string | number | boolean | Handler>;

export interface VNode {
  tag: string;
  attrs: Attrs;
  children: (VNode | string)[];
}

export function h(tag: string, attrs: Attrs = {}, ...children: (VNode | string | null | undefined)[]): VNode {
  return {
    tag,
    attrs,
    children: children.filter((c): c is VNode | string => c !== null && c !== undefined),
  };
}

/** Depth-first search over a tree. */
export function findAll(node: VNode, pred: (n: VNode) => boolean): VNode[] {
  const out: VNode[] = [];
  const walk = (n: VNode) => {
    if (pred(n)) out.push(n);
    for (const c of n.children) {
      if (typeof c !== "string") walk(c);
    }
  };
  walk(node);
  return out;
}

export function findFirst(node: VNode, pred: (n: VNode) => boolean): VNode | null {
  return findAll(node, pred)[0] ?? null;
}

/** Concatenated text content of a subtree. */
export function textOf(node: VNode): string {
  let out = "";
  const walk = (n: VNode | string) => {
    if (typeof n === "string") {
      out += n;
      return;
    }
    for (const c of n.children) walk(c);
  };
  walk(node);
  return out;
}

export function hasClass(node: VNode, cls: string): boolean {
  const v = node.attrs["class"];
  return typeof v === "string" && v.split(/\s+/).includes(cls);
}

const SVG_NS = "http://www.w3.org/2000/svg";
const SVG_TAGS = new Set(["svg", "g", "rect", "text", "title", "line", "circle", "path"]);

export function mount(node: VNode, doc: Document): Element {
  const build = (n: VNode, inSvg: boolean): Element => {
    const svg = inSvg || SVG_TAGS.has(n.tag);
    const el = svg ? doc.createElementNS(SVG_NS, n.tag) : doc.createElement(n.tag);
    for (const [key, value] of Object.entries(n.attrs)) {
      if (typeof value === "function") {
        el.addEventListener(key.replace(/^on/, ""), value as Handler);
      } else if (value === true) {
        el.setAttribute(key, "");
      } else if (value !== false) {
        el.setAttribute(key, String(value));
      }
    }
    for (const c of n.children) {
      el.append(typeof c === "string" ? doc.createTextNode(c) : build(c, svg));
    }
    return el;
  };
  return build(node, false);
}
