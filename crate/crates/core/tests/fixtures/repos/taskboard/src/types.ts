export type TaskId = string;

export enum Priority {
  Low = 1,
  Normal = 2,
  High = 3,
  Urgent = 4,
}

export type Status = "todo" | "doing" | "review" | "done";

export interface Task {
  id: TaskId;
  title: string;
  status: Status;
  priority: Priority;
  assignee?: string;
  due?: Date;
  labels: string[];
}

export interface BoardColumn {
  status: Status;
  title: string;
  limit?: number;
}

export const DEFAULT_COLUMNS: BoardColumn[] = [
  { status: "todo", title: "To do" },
  { status: "doing", title: "In progress", limit: 3 },
  { status: "review", title: "Review", limit: 2 },
  { status: "done", title: "Done" },
];

export function isOverdue(task: Task, now: Date = new Date()): boolean {
  return task.due !== undefined && task.status !== "done" && task.due.getTime() < now.getTime();
}
