/** Typed client for the snapshot service's /api/v1 endpoints. */

export interface DatasetInfo {
  id: string;
  regions: number;
  sequences: number;
  visits: number;
  pois: number;
  levels: number;
  bins_per_day: number;
  bin_width_minutes: number;
  categories: string[];
  day_types: string[];
  fingerprint: string;
}

export interface ClusterProperties {
  cluster_id: string;
  dominant_category: string | null;
  entropy: number;
  level: number;
  member_regions: string[];
  size: number;
  support: number;
  centroid: [number, number];
}

export interface ClusterFeature {
  type: "Feature";
  properties: ClusterProperties;
  geometry: { type: "Polygon" | "MultiPolygon"; coordinates: unknown };
}

export interface RegionsPayload {
  type: "FeatureCollection";
  features: ClusterFeature[];
  meta: {
    cluster_count: number;
    day_type: string;
    level: number;
    used_poi_fallback: boolean;
    window: string;
  };
}

export interface TimelineBin {
  bin: number;
  total: number;
  by_category: Record<string, number>;
}

export interface TimelinePayload {
  day_type: string;
  selection: string[];
  bins?: TimelineBin[];
  total?: number;
  in?: TimelineBin[];
  out?: TimelineBin[];
  total_in?: number;
  total_out?: number;
}

export interface Pattern {
  path: string[];
  centroids: [number, number][];
  flow: number;
  order: number;
  mode: "linear" | "annular";
  entropy_rate: number;
  edge_bins: number[][];
  bin_range: [number, number];
  window: string;
}

export interface GlobalPatternsPayload {
  day_type: string;
  level: number;
  window: string;
  patterns: Pattern[];
}

export interface LocalPatternsPayload extends GlobalPatternsPayload {
  selection: string[];
  merged_id: string | null;
}

export interface StatsPayload {
  cluster_id: string;
  window: string;
  day_type: string;
  sort: string;
  category_order: string[];
  poi_share: Record<string, number>;
  access_share: Record<string, number>;
  poi_support: number;
  access_support: number;
  zero_support: boolean;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly url: string,
    detail: string,
  ) {
    super(`${status} from ${url}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "/api/v1",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(
    path: string,
    params?: Record<string, string | number>,
    init?: RequestInit,
  ): Promise<T> {
    let url = this.base + path;
    if (params && Object.keys(params).length) {
      const qs = new URLSearchParams();
      for (const [k, v] of Object.entries(params)) qs.set(k, String(v));
      url += "?" + qs.toString();
    }
    const resp = await this.fetchFn(url, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        detail = body?.detail ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, url, String(detail));
    }
    return (await resp.json()) as T;
  }

  async datasets(signal?: AbortSignal): Promise<DatasetInfo> {
    const body = await this.request<{ datasets: DatasetInfo[] }>("/datasets", undefined, {
      signal,
    });
    const first = body.datasets[0];
    if (!first) throw new ApiError(500, this.base + "/datasets", "no datasets in snapshot");
    return first;
  }

  regions(
    window: string,
    dayType: string,
    level: number,
    signal?: AbortSignal,
  ): Promise<RegionsPayload> {
    return this.request("/regions", { window, day_type: dayType, level }, { signal });
  }

  timeline(dayType: string, selection: string[] = [], signal?: AbortSignal): Promise<TimelinePayload> {
    const params: Record<string, string> = { day_type: dayType };
    if (selection.length) params.selection = selection.join(",");
    return this.request("/timeline", params, { signal });
  }

  globalPatterns(
    window: string,
    dayType: string,
    level: number,
    topN = 12,
    signal?: AbortSignal,
  ): Promise<GlobalPatternsPayload> {
    return this.request(
      "/patterns/global",
      { window, day_type: dayType, level, top_n: topN },
      { signal },
    );
  }

  localPatterns(
    clusterIds: string[],
    window: string,
    dayType: string,
    signal?: AbortSignal,
  ): Promise<LocalPatternsPayload> {
    return this.request("/patterns/local", undefined, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ cluster_ids: clusterIds, window, day_type: dayType }),
      signal,
    });
  }

  stats(
    clusterId: string,
    window: string,
    dayType: string,
    sort: "poi" | "access" = "poi",
    signal?: AbortSignal,
  ): Promise<StatsPayload> {
    return this.request(
      `/regions/${encodeURIComponent(clusterId)}/stats`,
      { window, day_type: dayType, sort },
      { signal },
    );
  }
}
