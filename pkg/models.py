from sqlalchemy import (
    Column, Integer, String, Boolean, ForeignKey,
    DateTime, Float, func
)
from sqlalchemy.orm import relationship, declarative_base

Base = declarative_base()


class EvalRun(Base):
    __tablename__ = "eval_runs"

    id = Column(Integer, primary_key=True, autoincrement=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now())
    dataset = Column(String(255), nullable=False)
    fspec_name = Column(String(120), nullable=False, index=True)

    # mns / vas / cqs / cas
    criterion = Column(String(10), default="cas", nullable=False)

    mrr = Column(Float, nullable=False)
    hr_at_1 = Column(Float, nullable=False)
    hr_at_5 = Column(Float, nullable=False)
    hr_at_100 = Column(Float, nullable=False)
    task_count = Column(Integer, nullable=False)

    outcomes = relationship("TaskOutcome", back_populates="run", lazy="dynamic",
                            cascade="all, delete-orphan")


class TaskOutcome(Base):
    __tablename__ = "task_outcomes"

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(Integer, ForeignKey("eval_runs.id"), nullable=False, index=True)
    task_id = Column(String(120), nullable=False)

    # 正解が上位 listCap に無ければ NULL
    rank = Column(Integer, nullable=True)

    syntax_ok = Column(Boolean, default=False, nullable=False)
    semantic_ok = Column(Boolean, default=False, nullable=False)
    conformance = Column(Float, nullable=False)

    run = relationship("EvalRun", back_populates="outcomes")
